#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "guesswhich/types.hpp"

namespace guesswhich::pools {

/// Image id -> fixed-dimension feature vector, plus optional category
/// membership. Immutable once built; safe for concurrent reads.
class EmbeddingStore {
 public:
  class Builder {
   public:
    /// Throws DimensionMismatch or DuplicateId.
    Builder& add(ImageId id, std::vector<double> vector);
    EmbeddingStore build() &&;

   private:
    std::size_t dim_ = 0;
    std::map<ImageId, std::vector<double>> entries_;
  };

  EmbeddingStore() = default;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool contains(const ImageId& id) const { return index_.contains(id); }

  /// Ids in lexicographic order; iteration order never depends on file order.
  const std::vector<ImageId>& ids() const { return ids_; }

  /// Throws MissingEmbedding.
  std::span<const double> vector(const ImageId& id) const;

  const std::map<std::string, std::vector<ImageId>>& categories() const { return categories_; }

  /// Members are sorted and deduplicated. Throws UnknownImage for members not in the store.
  void set_categories(std::map<std::string, std::vector<ImageId>> categories);

 private:
  std::size_t dim_ = 0;
  std::vector<ImageId> ids_;
  std::unordered_map<ImageId, std::size_t> index_;
  std::vector<double> data_;  // row-major, ids_.size() x dim_
  std::map<std::string, std::vector<ImageId>> categories_;
};

double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Embedding file: JSON Lines of {"id": string, "vector": [number...]}. The
/// first record fixes the dimension.
EmbeddingStore load_embeddings(std::istream& in, const std::string& source = "embeddings");
EmbeddingStore load_embeddings_file(const std::string& path);

/// Category file: JSON Lines of {"category": string, "members": [id...]}.
std::map<std::string, std::vector<ImageId>> load_categories(std::istream& in, const std::string& source = "categories");
std::map<std::string, std::vector<ImageId>> load_categories_file(const std::string& path);

}  // namespace guesswhich::pools
