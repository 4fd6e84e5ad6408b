#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "noisyrag/correction/corrector.hpp"
#include "noisyrag/textnoise/tables.hpp"

namespace noisyrag::testing {

inline const textnoise::NoiseTables& tables() {
  static const auto t = textnoise::NoiseTables::load(textnoise::default_data_dir());
  return t;
}

inline const correction::BaseLexicon& lexicon() {
  static const auto l = correction::BaseLexicon::load(textnoise::default_data_dir() / "lexicon_en.txt");
  return l;
}

/// Lexicon words in sorted order, for reproducible sampling.
inline const std::vector<std::string>& sorted_lexicon() {
  static const auto v = [] {
    std::vector<std::string> w(lexicon().words().begin(), lexicon().words().end());
    std::sort(w.begin(), w.end());
    return w;
  }();
  return v;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("noisyrag-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
}

}  // namespace noisyrag::testing
