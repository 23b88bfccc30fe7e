#include "guesswhich/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "guesswhich/error.hpp"
#include "guesswhich/jsonl.hpp"

namespace guesswhich::pools {

EmbeddingStore::Builder& EmbeddingStore::Builder::add(ImageId id, std::vector<double> vector) {
  if (vector.empty()) throw Error(ErrorCode::DimensionMismatch, "embedding for '" + id + "' is empty");
  if (entries_.empty()) {
    dim_ = vector.size();
  } else if (vector.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "embedding for '" + id + "' has dim " + std::to_string(vector.size()) +
                                                  ", expected " + std::to_string(dim_));
  }
  if (entries_.contains(id)) throw Error(ErrorCode::DuplicateId, "image id '" + id + "' appears twice");
  entries_.emplace(std::move(id), std::move(vector));
  return *this;
}

EmbeddingStore EmbeddingStore::Builder::build() && {
  EmbeddingStore store;
  store.dim_ = dim_;
  store.ids_.reserve(entries_.size());
  store.data_.reserve(entries_.size() * dim_);
  for (auto& [id, vec] : entries_) {
    store.index_.emplace(id, store.ids_.size());
    store.ids_.push_back(id);
    store.data_.insert(store.data_.end(), vec.begin(), vec.end());
  }
  entries_.clear();
  return store;
}

std::span<const double> EmbeddingStore::vector(const ImageId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::MissingEmbedding, "no embedding for image '" + id + "'");
  return {data_.data() + it->second * dim_, dim_};
}

void EmbeddingStore::set_categories(std::map<std::string, std::vector<ImageId>> categories) {
  for (auto& [name, members] : categories) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (const auto& id : members)
      if (!contains(id))
        throw Error(ErrorCode::UnknownImage, "category '" + name + "' lists unknown image '" + id + "'");
  }
  categories_ = std::move(categories);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

EmbeddingStore load_embeddings(std::istream& in, const std::string& source) {
  EmbeddingStore::Builder builder;
  for_each_jsonl_record(in, source, [&](const nlohmann::json& record, std::size_t line) {
    const auto where = source + ":" + std::to_string(line);
    auto id = record.find("id");
    auto vec = record.find("vector");
    if (id == record.end() || !id->is_string() || vec == record.end() || !vec->is_array())
      throw Error(ErrorCode::ParseError, where + ": expected {\"id\": string, \"vector\": [number...]}");
    std::vector<double> values;
    values.reserve(vec->size());
    for (const auto& v : *vec) {
      if (!v.is_number()) throw Error(ErrorCode::ParseError, where + ": vector entries must be numbers");
      values.push_back(v.get<double>());
    }
    try {
      builder.add(id->get<std::string>(), std::move(values));
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.detail());
    }
  });
  return std::move(builder).build();
}

EmbeddingStore load_embeddings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open embedding file '" + path + "'");
  return load_embeddings(in, path);
}

std::map<std::string, std::vector<ImageId>> load_categories(std::istream& in, const std::string& source) {
  std::map<std::string, std::vector<ImageId>> out;
  for_each_jsonl_record(in, source, [&](const nlohmann::json& record, std::size_t line) {
    const auto where = source + ":" + std::to_string(line);
    try {
      auto name = record.at("category").get<std::string>();
      auto members = record.at("members").get<std::vector<ImageId>>();
      if (out.contains(name)) throw Error(ErrorCode::DuplicateId, where + ": category '" + name + "' appears twice");
      out.emplace(std::move(name), std::move(members));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
  });
  return out;
}

std::map<std::string, std::vector<ImageId>> load_categories_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open category file '" + path + "'");
  return load_categories(in, path);
}

}  // namespace guesswhich::pools
