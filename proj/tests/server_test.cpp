#include <doctest.h>

#include <fstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "guesswhich/service/server.hpp"
#include "support.hpp"

using namespace guesswhich;
using namespace guesswhich::service;
using nlohmann::json;

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

/// Full service on a free local port, served from a background thread.
struct LiveServer {
  explicit LiveServer(const std::filesystem::path& image_dir)
      : broker({{"alpha", agents::make_baseline_answerer(agents::ScriptedSpec{{{"is it red?", "yes"}}})}}, 2),
        orch(config(), testing::numbered_pools(2), broker, store, hub.sink()),
        server({"127.0.0.1", 0, image_dir, {}, 50}, orch, hub) {
    port = server.bind();
    thread = std::thread([this] { server.run(); });
  }
  ~LiveServer() {
    server.stop();
    thread.join();
  }

  static OrchestratorConfig config() {
    OrchestratorConfig cfg;
    cfg.conditions = {"alpha"};
    cfg.games_per_assignment = 2;
    cfg.token_seed = 3;
    return cfg;
  }

  ThreadBroker broker;
  MemoryLogStore store;
  ConnectionHub hub;
  Orchestrator orch;
  GameServer server;
  std::uint16_t port = 0;
  std::thread thread;
};

http::response<http::string_body> get(std::uint16_t port, const std::string& target) {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  http::request<http::string_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return res;
}

class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    net::connect(ws_.next_layer(), std::array{tcp::endpoint(net::ip::make_address("127.0.0.1"), port)});
    ws_.handshake("127.0.0.1", "/ws");
  }
  ~Client() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

  void send_raw(const std::string& text) { ws_.write(net::buffer(text)); }

  void send(const std::string& type, const std::string& sid, json payload) {
    send_raw(json{{"type", type}, {"session_id", sid}, {"seq", ++seq_}, {"payload", std::move(payload)}}.dump());
  }

  json receive() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  }

  /// Reads until a message of `type` arrives.
  json until(const std::string& type) {
    for (;;) {
      auto m = receive();
      if (m["type"] == type) return m;
    }
  }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
  std::int64_t seq_ = 0;
};

}  // namespace

TEST_CASE("image files are found by id only inside the image directory") {
  testing::TempDir dir("images");
  std::ofstream(dir.file("img000.png")) << "png";
  std::ofstream(dir.file("raw")) << "raw";
  CHECK(find_image_file(dir.path(), "img000") == dir.path() / "img000.png");
  CHECK(find_image_file(dir.path(), "raw") == dir.path() / "raw");
  CHECK_FALSE(find_image_file(dir.path(), "img001"));
  CHECK_FALSE(find_image_file(dir.path(), "../img000"));
  CHECK_FALSE(find_image_file(dir.path(), "sub/img000"));
  CHECK_FALSE(find_image_file({}, "img000"));
}

TEST_CASE("http endpoints") {
  testing::TempDir dir("served");
  std::ofstream(dir.file("img000.png")) << "not really a png";
  LiveServer live(dir.path());

  auto health = get(live.port, "/healthz");
  CHECK(health.result() == http::status::ok);
  CHECK(json::parse(health.body())["status"] == "ok");

  auto image = get(live.port, "/images/img000");
  CHECK(image.result() == http::status::ok);
  CHECK(image.body() == "not really a png");
  CHECK(image[http::field::content_type] == "image/png");

  CHECK(get(live.port, "/images/img404").result() == http::status::not_found);
  CHECK(get(live.port, "/images/..%2Fsecret").result() == http::status::not_found);
  CHECK(get(live.port, "/elsewhere").result() == http::status::not_found);
}

TEST_CASE("websocket clients play and resume") {
  testing::TempDir dir("ws");
  LiveServer live(dir.path());
  std::string token;
  std::string sid;
  {
    Client client(live.port);
    client.send("JoinQueue", "", {{"worker_id", "w1"}});
    auto start = client.until("AssignmentStart");
    token = start["payload"]["resume_token"];
    auto game = client.until("GameStart");
    sid = game["session_id"];
    CHECK(game["payload"]["caption"] == "A caption for 0.");

    client.send_raw("{oops");
    CHECK(client.until("Error")["payload"]["code"] == "SchemaError");

    client.send("CaptionGuess", sid, {{"image_id", "img003"}});
    CHECK(client.until("GuessAck")["payload"]["state"] == "Dialog(1)/AwaitingQuestion");
    client.send("Question", sid, {{"text", "Is it red?"}});
    client.until("Typing");
    auto answer = client.until("Answer");
    CHECK(answer["payload"]["text"] == "yes");
    CHECK(answer["session_id"] == sid);
    client.send("RoundGuess", sid, {{"image_id", "img003"}});
    client.until("GuessAck");
  }
  // the server notices the close asynchronously
  for (int i = 0; i < 100 && live.hub.size() > 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  CHECK(live.hub.size() == 0);

  Client again(live.port);
  again.send("Resume", "", {{"worker_id", "w1"}, {"resume_token", token}});
  auto snapshot = again.until("GameStart");
  CHECK(snapshot["session_id"] == sid);
  CHECK(snapshot["payload"]["snapshot"]["rounds"].size() == 1);
  CHECK(snapshot["payload"]["state"] == "Dialog(2)/AwaitingQuestion");
  again.send("Question", sid, {{"text", "anything else?"}});
  CHECK(again.until("Answer")["payload"]["text"] == "I can't tell.");
}
