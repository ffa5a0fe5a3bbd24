#include "mmdial/corpus.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <unordered_set>

#include "mmdial/error.hpp"
#include "mmdial/io.hpp"

namespace mmdial {

namespace {

using io::Json;

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::string require_string(const Json& record, const char* field) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw std::invalid_argument(std::string("missing string field \"") + field + "\"");
  }
  return it->get<std::string>();
}

Split require_split(const Json& record) {
  auto name = require_string(record, "split");
  auto split = parse_split(name);
  if (!split) throw std::invalid_argument("unknown split \"" + name + "\"");
  return *split;
}

std::string check_source(const Json& record, std::string_view source) {
  auto it = record.find("source");
  if (it == record.end() || it->is_null()) return std::string(source);
  if (!it->is_string()) throw std::invalid_argument("\"source\" must be a string");
  auto value = it->get<std::string>();
  if (value != source) {
    throw std::invalid_argument("record source \"" + value + "\" does not match \"" + std::string(source) + "\"");
  }
  return value;
}

// Wraps per-record validation failures with the file position.
template <typename Fn>
void parse_records(const std::filesystem::path& path, Fn&& fn) {
  io::for_each_jsonl(path, [&](const Json& record, std::size_t line) {
    try {
      fn(record, line);
    } catch (const std::invalid_argument& e) {
      throw ParseError(path, line, e.what());
    }
  });
}

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

EmbeddingStore load_binary(const std::filesystem::path& path, const std::string& bytes,
                           std::optional<std::size_t> expect_dim) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 8) throw ParseError(path, 0, "truncated header");
  const std::size_t dim = read_u32(p + 4);
  if (dim == 0) throw ParseError(path, 0, "dimension must be positive");
  if (expect_dim && *expect_dim != dim) {
    throw ValidationError(path.string() + ": dimension " + std::to_string(dim) + " does not match expected " +
                          std::to_string(*expect_dim));
  }
  EmbeddingStore store(dim);
  std::vector<float> vec(dim);
  std::size_t pos = 8;
  std::size_t record = 0;
  while (pos < size) {
    ++record;
    if (pos + 2 > size) throw ParseError(path, record, "truncated id length");
    const std::size_t id_len = read_u16(p + pos);
    pos += 2;
    if (pos + id_len + 4 * dim > size) throw ParseError(path, record, "truncated record");
    std::string id(bytes.data() + pos, id_len);
    pos += id_len;
    for (std::size_t j = 0; j < dim; ++j, pos += 4) vec[j] = std::bit_cast<float>(read_u32(p + pos));
    try {
      store.add(std::move(id), vec);
    } catch (const ValidationError& e) {
      throw ParseError(path, record, e.what());
    }
  }
  return store;
}

EmbeddingStore load_text(const std::filesystem::path& path, std::optional<std::size_t> expect_dim) {
  std::optional<EmbeddingStore> store;
  std::vector<double> vec;
  io::for_each_jsonl(path, [&](const Json& record, std::size_t line) {
    std::string id;
    try {
      id = require_string(record, "id");
    } catch (const std::invalid_argument& e) {
      throw ParseError(path, line, e.what());
    }
    auto it = record.find("vector");
    if (it == record.end() || !it->is_array()) throw ParseError(path, line, "missing array field \"vector\" for " + id);
    vec.clear();
    for (const auto& x : *it) {
      if (!x.is_number()) throw ParseError(path, line, "non-finite or non-numeric component in " + id);
      vec.push_back(x.get<double>());
    }
    if (!store) {
      if (vec.empty()) throw ParseError(path, line, "empty vector for " + id);
      if (expect_dim && *expect_dim != vec.size()) {
        throw ValidationError(path.string() + ": dimension " + std::to_string(vec.size()) +
                              " does not match expected " + std::to_string(*expect_dim));
      }
      store.emplace(vec.size());
    }
    try {
      store->add(id, std::span<const double>(vec));
    } catch (const ValidationError& e) {
      throw ParseError(path, line, e.what());
    }
  });
  if (!store) return EmbeddingStore(expect_dim.value_or(1));
  return std::move(*store);
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid" || name == "validation" || name == "dev") return Split::kValid;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

EmbeddingStore::EmbeddingStore(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingStore::add(std::string id, std::span<const float> vector) {
  std::vector<double> wide(vector.begin(), vector.end());
  append_normalized(std::move(id), wide);
}

void EmbeddingStore::add(std::string id, std::span<const double> vector) {
  append_normalized(std::move(id), vector);
}

void EmbeddingStore::append_normalized(std::string id, std::span<const double> vector) {
  if (vector.size() != dimension_) {
    throw ValidationError("vector " + id + " has dimension " + std::to_string(vector.size()) + ", expected " +
                          std::to_string(dimension_));
  }
  double sum = 0.0;
  for (double x : vector) {
    if (!std::isfinite(x) || !std::isfinite(static_cast<float>(x))) {
      throw ValidationError("vector " + id + " has a non-finite component");
    }
    sum += x * x;
  }
  if (sum == 0.0) throw ValidationError("vector " + id + " has zero norm");
  if (index_.contains(id)) throw DuplicateError("duplicate embedding id " + id);
  const double norm = std::sqrt(sum);
  const std::size_t start = data_.size();
  data_.reserve(start + dimension_);
  for (double x : vector) data_.push_back(static_cast<float>(x / norm));
  norms_.push_back(l2_norm({data_.data() + start, dimension_}));
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
}

std::optional<std::size_t> EmbeddingStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingStore EmbeddingStore::subset(std::span<const std::string> ids) const {
  EmbeddingStore out(dimension_);
  out.ids_.reserve(ids.size());
  out.data_.reserve(ids.size() * dimension_);
  for (const auto& id : ids) {
    auto row_index = find(id);
    if (!row_index) throw ValidationError("no embedding for id " + id);
    if (out.index_.contains(id)) throw DuplicateError("duplicate id " + id);
    auto r = row(*row_index);
    out.data_.insert(out.data_.end(), r.begin(), r.end());
    out.norms_.push_back(norms_[*row_index]);
    out.index_.emplace(id, out.ids_.size());
    out.ids_.push_back(id);
  }
  return out;
}

void EmbeddingStore::merge(const EmbeddingStore& other) {
  if (other.dimension_ != dimension_) {
    throw ValidationError("cannot merge embeddings of dimension " + std::to_string(other.dimension_) + " into " +
                          std::to_string(dimension_));
  }
  for (std::size_t i = 0; i < other.size(); ++i) {
    if (index_.contains(other.ids_[i])) throw DuplicateError("duplicate embedding id " + other.ids_[i]);
    auto r = other.row(i);
    data_.insert(data_.end(), r.begin(), r.end());
    norms_.push_back(other.norms_[i]);
    index_.emplace(other.ids_[i], ids_.size());
    ids_.push_back(other.ids_[i]);
  }
}

std::vector<Dialogue> load_dialogues(const std::filesystem::path& path, std::string_view source) {
  std::vector<Dialogue> out;
  std::unordered_set<std::string> seen;
  parse_records(path, [&](const Json& record, std::size_t) {
    Dialogue d;
    d.dialogue_id = require_string(record, "dialogue_id");
    if (blank(d.dialogue_id)) throw std::invalid_argument("empty dialogue_id");
    d.source = check_source(record, source);
    d.split = require_split(record);
    auto turns = record.find("turns");
    if (turns == record.end() || !turns->is_array()) {
      throw std::invalid_argument("dialogue " + d.dialogue_id + ": missing array field \"turns\"");
    }
    for (const auto& t : *turns) {
      if (!t.is_object()) throw std::invalid_argument("dialogue " + d.dialogue_id + ": turn is not an object");
      Turn turn;
      auto speaker = t.find("speaker");
      if (speaker == t.end() || !speaker->is_number_integer() || speaker->get<long long>() < 0) {
        throw std::invalid_argument("dialogue " + d.dialogue_id + ": turn needs a non-negative integer speaker");
      }
      turn.speaker = speaker->get<int>();
      turn.text = require_string(t, "text");
      if (blank(turn.text)) {
        throw std::invalid_argument("dialogue " + d.dialogue_id + ": empty turn " + std::to_string(d.turns.size()));
      }
      d.turns.push_back(std::move(turn));
    }
    if (d.turns.size() < 2) {
      throw std::invalid_argument("dialogue " + d.dialogue_id + " has " + std::to_string(d.turns.size()) +
                                  " turn(s); at least 2 required");
    }
    if (!seen.insert(d.dialogue_id).second) throw std::invalid_argument("duplicate dialogue_id " + d.dialogue_id);
    out.push_back(std::move(d));
  });
  return out;
}

std::vector<ImageRecord> load_images(const std::filesystem::path& path, std::string_view source) {
  std::vector<ImageRecord> out;
  std::unordered_set<std::string> seen;
  parse_records(path, [&](const Json& record, std::size_t) {
    ImageRecord img;
    img.image_id = require_string(record, "image_id");
    if (blank(img.image_id)) throw std::invalid_argument("empty image_id");
    img.source = check_source(record, source);
    img.split = require_split(record);
    img.caption = require_string(record, "caption");
    if (blank(img.caption)) throw std::invalid_argument("image " + img.image_id + ": empty caption");
    if (!seen.insert(img.image_id).second) throw std::invalid_argument("duplicate image_id " + img.image_id);
    out.push_back(std::move(img));
  });
  return out;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path, std::optional<std::size_t> expect_dim) {
  auto bytes = io::read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kEmbeddingMagic, 4) == 0) {
    return load_binary(path, bytes, expect_dim);
  }
  return load_text(path, expect_dim);
}

void write_dialogues(const std::filesystem::path& path, std::span<const Dialogue> dialogues) {
  std::string out;
  for (const auto& d : dialogues) {
    io::OrderedJson rec;
    rec["dialogue_id"] = d.dialogue_id;
    rec["source"] = d.source;
    rec["split"] = to_string(d.split);
    auto& turns = rec["turns"] = io::OrderedJson::array();
    for (const auto& t : d.turns) turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
    out += rec.dump() + "\n";
  }
  io::write_atomic(path, out);
}

void write_images(const std::filesystem::path& path, std::span<const ImageRecord> images) {
  std::string out;
  for (const auto& img : images) {
    io::OrderedJson rec;
    rec["image_id"] = img.image_id;
    rec["source"] = img.source;
    rec["split"] = to_string(img.split);
    rec["caption"] = img.caption;
    out += rec.dump() + "\n";
  }
  io::write_atomic(path, out);
}

void write_embeddings_binary(const std::filesystem::path& path, std::size_t dimension,
                             std::span<const RawEmbedding> entries) {
  std::string out(kEmbeddingMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(dimension));
  for (const auto& e : entries) {
    if (e.vector.size() != dimension) throw ValidationError("vector " + e.id + " has the wrong dimension");
    if (e.id.size() > 0xFFFF) throw ValidationError("id too long: " + e.id.substr(0, 32));
    put_u16(out, static_cast<std::uint16_t>(e.id.size()));
    out += e.id;
    for (float x : e.vector) put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  io::write_atomic(path, out);
}

void write_embeddings_text(const std::filesystem::path& path, std::span<const RawEmbedding> entries) {
  std::string out;
  for (const auto& e : entries) {
    io::OrderedJson rec;
    rec["id"] = e.id;
    rec["vector"] = e.vector;
    out += rec.dump() + "\n";
  }
  io::write_atomic(path, out);
}

}  // namespace mmdial
