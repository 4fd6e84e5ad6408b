#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace noisyrag::textnoise {

/// Per-letter substitution lists indexed by 'a'..'z'. Tables are validated on
/// construction, so a live object always satisfies its invariants.
class CharSubstitutionTable {
 public:
  using Entries = std::array<std::vector<char>, 26>;

  const std::vector<char>& replacements(char lower_letter) const;
  bool contains(char from, char to) const;
  const Entries& entries() const noexcept { return entries_; }

 protected:
  explicit CharSubstitutionTable(Entries entries) : entries_(std::move(entries)) {}
  Entries entries_;
};

/// US QWERTY neighbours. Every letter has an entry, nobody is their own
/// neighbour, and adjacency is symmetric.
class KeyboardAdjacency : public CharSubstitutionTable {
 public:
  explicit KeyboardAdjacency(Entries entries);
  static KeyboardAdjacency parse(std::string_view tsv);
  static KeyboardAdjacency load(const std::filesystem::path& path);
  bool adjacent(char a, char b) const { return contains(a, b); }
};

/// Visually similar single characters (letters or digits), no identities.
class VisualConfusionTable : public CharSubstitutionTable {
 public:
  explicit VisualConfusionTable(Entries entries);
  static VisualConfusionTable parse(std::string_view tsv);
  static VisualConfusionTable load(const std::filesystem::path& path);
  /// Symmetric view: either direction listed counts.
  bool confusable(char a, char b) const;
};

class SpellingDictionary {
 public:
  using Map = std::unordered_map<std::string, std::vector<std::string>>;

  explicit SpellingDictionary(Map entries);
  static SpellingDictionary parse(std::string_view tsv);
  static SpellingDictionary load(const std::filesystem::path& path);

  /// nullptr when the lowercase word has no entry.
  const std::vector<std::string>* misspellings(std::string_view lower_word) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  Map entries_;
};

struct NoiseTables {
  KeyboardAdjacency keyboard;
  VisualConfusionTable visual;
  SpellingDictionary spelling;

  /// Reads keyboard_adjacency.tsv, visual_confusion.tsv and misspellings.tsv.
  static NoiseTables load(const std::filesystem::path& data_dir);
};

/// Directory holding the bundled data files. NOISYRAG_DATA_DIR overrides the
/// compiled-in default.
std::filesystem::path default_data_dir();

std::string read_text_file(const std::filesystem::path& path);

}  // namespace noisyrag::textnoise
