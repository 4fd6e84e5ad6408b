#include "noisyrag/textnoise/tables.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "noisyrag/error.hpp"
#include "noisyrag/text.hpp"

#ifndef NOISYRAG_DEFAULT_DATA_DIR
#define NOISYRAG_DEFAULT_DATA_DIR "data"
#endif

namespace noisyrag::textnoise {
namespace {

struct TsvRow {
  std::size_t line_no;
  std::string key;
  std::vector<std::string> values;
};

std::vector<TsvRow> parse_tsv(std::string_view tsv, std::string_view what) {
  std::vector<TsvRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= tsv.size()) {
    std::size_t end = tsv.find('\n', pos);
    if (end == std::string_view::npos) end = tsv.size();
    std::string_view line = tsv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty() || line.front() == '#') {
      if (end == tsv.size()) break;
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      fail(ErrorKind::kTableValidation, std::string(what) + ": line " + std::to_string(line_no) +
                                            " has no TAB separator");
    }
    TsvRow row{line_no, std::string(line.substr(0, tab)), {}};
    std::string_view rest = line.substr(tab + 1);
    std::size_t p = 0;
    while (p <= rest.size()) {
      std::size_t comma = rest.find(',', p);
      if (comma == std::string_view::npos) comma = rest.size();
      row.values.emplace_back(text::trim(rest.substr(p, comma - p)));
      p = comma + 1;
      if (comma == rest.size()) break;
    }
    rows.push_back(std::move(row));
    if (end == tsv.size()) break;
  }
  return rows;
}

[[noreturn]] void table_error(std::string_view what, const std::string& msg) {
  fail(ErrorKind::kTableValidation, std::string(what) + ": " + msg);
}

CharSubstitutionTable::Entries parse_char_table(std::string_view tsv, std::string_view what) {
  CharSubstitutionTable::Entries entries;
  for (const TsvRow& row : parse_tsv(tsv, what)) {
    if (row.key.size() != 1 || row.key[0] < 'a' || row.key[0] > 'z') {
      table_error(what, "line " + std::to_string(row.line_no) + ": key '" + row.key +
                            "' is not a lowercase letter");
    }
    auto& slot = entries[static_cast<std::size_t>(row.key[0] - 'a')];
    if (!slot.empty()) table_error(what, "duplicate key '" + row.key + "'");
    for (const std::string& v : row.values) {
      if (v.size() != 1) {
        table_error(what, "line " + std::to_string(row.line_no) + ": replacement '" + v +
                              "' is not a single character");
      }
      slot.push_back(v[0]);
    }
  }
  return entries;
}

void check_common(const CharSubstitutionTable::Entries& entries, std::string_view what) {
  for (std::size_t i = 0; i < 26; ++i) {
    const char letter = static_cast<char>('a' + i);
    if (entries[i].empty()) table_error(what, std::string("letter '") + letter + "' has no entry");
    for (char r : entries[i]) {
      if (r == letter) table_error(what, std::string("letter '") + letter + "' maps to itself");
    }
  }
}

}  // namespace

const std::vector<char>& CharSubstitutionTable::replacements(char lower_letter) const {
  if (lower_letter < 'a' || lower_letter > 'z') {
    fail(ErrorKind::kInvalidInput, std::string("no substitution entry for '") + lower_letter + "'");
  }
  return entries_[static_cast<std::size_t>(lower_letter - 'a')];
}

bool CharSubstitutionTable::contains(char from, char to) const {
  if (from < 'a' || from > 'z') return false;
  for (char c : entries_[static_cast<std::size_t>(from - 'a')]) {
    if (c == to) return true;
  }
  return false;
}

KeyboardAdjacency::KeyboardAdjacency(Entries entries) : CharSubstitutionTable(std::move(entries)) {
  constexpr std::string_view what = "keyboard adjacency";
  check_common(entries_, what);
  for (std::size_t i = 0; i < 26; ++i) {
    const char a = static_cast<char>('a' + i);
    for (char b : entries_[i]) {
      if (b < 'a' || b > 'z') table_error(what, std::string("neighbour '") + b + "' is not a lowercase letter");
      if (!contains(b, a)) {
        table_error(what, std::string("adjacency is not symmetric: ") + a + " -> " + b);
      }
    }
  }
}

KeyboardAdjacency KeyboardAdjacency::parse(std::string_view tsv) {
  return KeyboardAdjacency(parse_char_table(tsv, "keyboard adjacency"));
}

KeyboardAdjacency KeyboardAdjacency::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

VisualConfusionTable::VisualConfusionTable(Entries entries)
    : CharSubstitutionTable(std::move(entries)) {
  constexpr std::string_view what = "visual confusion";
  check_common(entries_, what);
  for (const auto& list : entries_) {
    for (char c : list) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
      if (!ok) table_error(what, std::string("replacement '") + c + "' is not a letter or digit");
    }
  }
}

VisualConfusionTable VisualConfusionTable::parse(std::string_view tsv) {
  return VisualConfusionTable(parse_char_table(tsv, "visual confusion"));
}

VisualConfusionTable VisualConfusionTable::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

bool VisualConfusionTable::confusable(char a, char b) const { return contains(a, b) || contains(b, a); }

SpellingDictionary::SpellingDictionary(Map entries) : entries_(std::move(entries)) {
  constexpr std::string_view what = "spelling dictionary";
  for (const auto& [word, list] : entries_) {
    if (word.empty()) table_error(what, "empty key");
    for (char c : word) {
      if (text::is_ascii_upper(c)) table_error(what, "key '" + word + "' is not lowercase");
    }
    if (list.empty()) table_error(what, "key '" + word + "' has no misspellings");
    for (const std::string& m : list) {
      if (m.empty()) table_error(what, "key '" + word + "' has an empty misspelling");
      if (m == word) table_error(what, "misspelling equals its key '" + word + "'");
      for (char c : m) {
        if (c < 'a' || c > 'z') {
          table_error(what, "misspelling '" + m + "' of '" + word + "' is not lowercase alphabetic");
        }
      }
    }
  }
}

SpellingDictionary SpellingDictionary::parse(std::string_view tsv) {
  Map entries;
  for (TsvRow& row : parse_tsv(tsv, "spelling dictionary")) {
    auto [it, inserted] = entries.emplace(row.key, std::move(row.values));
    if (!inserted) table_error("spelling dictionary", "duplicate key '" + row.key + "'");
  }
  return SpellingDictionary(std::move(entries));
}

SpellingDictionary SpellingDictionary::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

const std::vector<std::string>* SpellingDictionary::misspellings(std::string_view lower_word) const {
  auto it = entries_.find(std::string(lower_word));
  return it == entries_.end() ? nullptr : &it->second;
}

NoiseTables NoiseTables::load(const std::filesystem::path& data_dir) {
  return NoiseTables{KeyboardAdjacency::load(data_dir / "keyboard_adjacency.tsv"),
                     VisualConfusionTable::load(data_dir / "visual_confusion.tsv"),
                     SpellingDictionary::load(data_dir / "misspellings.tsv")};
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("NOISYRAG_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return NOISYRAG_DEFAULT_DATA_DIR;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace noisyrag::textnoise
