#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmdial {

enum class Split { kTrain, kValid, kTest };

inline constexpr Split kAllSplits[] = {Split::kTrain, Split::kValid, Split::kTest};

std::string_view to_string(Split split);
// Accepts "train", "valid" and "test"; also "validation" and "dev" as aliases.
std::optional<Split> parse_split(std::string_view name);

struct Turn {
  int speaker = 0;
  std::string text;

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string dialogue_id;
  std::string source;
  Split split = Split::kTrain;
  std::vector<Turn> turns;

  bool operator==(const Dialogue&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::string source;
  std::string caption;
  Split split = Split::kTrain;

  bool operator==(const ImageRecord&) const = default;
};

// Row-major store of L2-normalized vectors addressed by id.
//
// Vectors are validated and normalized on insertion: every component must be
// finite and the norm non-zero. Components are stored as 32-bit floats; the
// double-precision norm of each stored row is kept alongside so similarity
// kernels can form exact cosines without re-reading the row.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dimension);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool normalized() const { return true; }

  // Normalizes and appends. Throws ValidationError on bad input or duplicate id.
  void add(std::string id, std::span<const float> vector);
  void add(std::string id, std::span<const double> vector);

  std::optional<std::size_t> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }

  const std::string& id(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t row) const {
    return {data_.data() + row * dimension_, dimension_};
  }
  double norm(std::size_t row) const { return norms_[row]; }
  std::span<const float> data() const { return data_; }
  std::span<const std::string> ids() const { return ids_; }

  // Copy holding only `ids`, in the given order. Throws if any is missing.
  EmbeddingStore subset(std::span<const std::string> ids) const;

  // Appends every row of `other`. Dimensions must agree.
  void merge(const EmbeddingStore& other);

 private:
  void append_normalized(std::string id, std::span<const double> vector);

  std::size_t dimension_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Sum of squares accumulated in double, in component order.
double l2_norm(std::span<const float> v);

std::vector<Dialogue> load_dialogues(const std::filesystem::path& path, std::string_view source);
std::vector<ImageRecord> load_images(const std::filesystem::path& path, std::string_view source);

// Auto-detects the packed binary form by its magic bytes; otherwise JSONL.
EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expect_dim = std::nullopt);

void write_dialogues(const std::filesystem::path& path, std::span<const Dialogue> dialogues);
void write_images(const std::filesystem::path& path, std::span<const ImageRecord> images);

struct RawEmbedding {
  std::string id;
  std::vector<float> vector;
};

// Writers take raw vectors so fixtures can hold unnormalized data.
void write_embeddings_binary(const std::filesystem::path& path, std::size_t dimension,
                             std::span<const RawEmbedding> entries);
void write_embeddings_text(const std::filesystem::path& path, std::span<const RawEmbedding> entries);

inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};

}  // namespace mmdial
