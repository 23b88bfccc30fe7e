#include "guesswhich/cli.hpp"

int main(int argc, char** argv) { return guesswhich::cli::run(argc, argv); }
