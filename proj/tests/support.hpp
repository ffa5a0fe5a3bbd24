#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mmdial/builder.hpp"
#include "mmdial/corpus.hpp"
#include "mmdial/io.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path fixtures() { return MMDIAL_FIXTURES; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("mmdial-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline mmdial::io::Json read_json(const fs::path& path) { return mmdial::io::Json::parse(read_text(path)); }

inline std::size_t count_lines(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

// Runs a shell command, returning its exit status.
inline int run(const std::string& command) {
  int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

inline mmdial::Dialogue dialogue(const std::string& id, std::vector<std::string> texts,
                                 mmdial::Split split = mmdial::Split::kTrain, const std::string& source = "daily") {
  mmdial::Dialogue d;
  d.dialogue_id = id;
  d.source = source;
  d.split = split;
  for (std::size_t i = 0; i < texts.size(); ++i) d.turns.push_back({static_cast<int>(i % 2), texts[i]});
  return d;
}

// Instance with just the fields calibration and filtering look at.
inline mmdial::Instance instance(const std::string& id, double similarity, const std::string& combo = "daily+coco",
                                 mmdial::Split split = mmdial::Split::kTest) {
  mmdial::Instance inst;
  inst.instance_id = id;
  inst.dialogue_id = id;
  inst.combination = mmdial::Combination::from_key(combo);
  inst.split = split;
  inst.context = {{0, "hello there"}};
  inst.target = "target " + id;
  inst.image_id = "img-" + id;
  inst.similarity = similarity;
  return inst;
}

}  // namespace testing_support
