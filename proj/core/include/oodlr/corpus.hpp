/* Copyright 2026 The oodlr Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
// Intent-classification datasets: loading, tokenization, vocabulary and the
// in-domain / out-of-domain split machinery.

#ifndef OODLR_CORPUS_HPP_
#define OODLR_CORPUS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace oodlr {

inline constexpr std::string_view kDefaultOodLabel = "outOfDomain";

struct Utterance {
  std::int64_t id = 0;
  std::string raw;
  std::vector<std::string> tokens;
  // Hierarchical path such as "alarm/set_alarm". Absent for OOD rows.
  std::optional<std::string> label;
  bool is_ood = false;
};

/// Column layout of a TSV file, e.g. "label,text" or "id,label,text".
/// Unknown column names are accepted and ignored ("-" is the conventional
/// placeholder).
class TsvSchema {
 public:
  enum class Column { kId, kLabel, kText, kIgnore };

  TsvSchema();
  static TsvSchema Parse(std::string_view spec);

  const std::vector<Column>& columns() const { return columns_; }
  std::string_view ood_label() const { return ood_label_; }
  void set_ood_label(std::string label) { ood_label_ = std::move(label); }
  std::string ToString() const;

 private:
  std::vector<Column> columns_;
  std::string ood_label_{kDefaultOodLabel};
};

/// Lowercases, splits on whitespace and detaches ASCII punctuation.
/// An apostrophe followed by letters or digits starts a clitic token ("'s").
std::vector<std::string> Tokenize(std::string_view raw);

/// Reads one utterance per line. Rows that tokenize to nothing are dropped
/// with a warning. Ids come from the id column when present, otherwise
/// first_id + line index.
std::vector<Utterance> LoadTsv(const std::filesystem::path& path,
                               const TsvSchema& schema,
                               std::int64_t first_id = 0);

/// Writes "id<TAB>label<TAB>text" rows (OOD rows carry ood_label).
void SaveTsv(const std::filesystem::path& path,
             const std::vector<Utterance>& utterances,
             std::string_view ood_label = kDefaultOodLabel);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary();

  static Vocabulary Build(const std::vector<Utterance>& train,
                          std::size_t min_freq = 1);

  /// Id of a token, or kUnk if unknown.
  int Id(std::string_view token) const;
  const std::string& Token(int id) const;
  std::size_t Frequency(int id) const;
  std::size_t size() const { return id_to_token_.size(); }
  bool Contains(std::string_view token) const;

  /// Non-reserved ids in id order.
  std::vector<int> ContentIds() const;

  /// 64-bit FNV-1a over the ordered token list; equal vocabularies agree.
  std::uint64_t Fingerprint() const;

  void Save(const std::filesystem::path& path) const;
  static Vocabulary Load(const std::filesystem::path& path);

  // Used by Build and Load. Tokens must be unique and non-reserved.
  void Add(std::string token, std::size_t freq);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::size_t> freq_;
};

/// BOS + ids (UNK for unknown tokens) + EOS.
std::vector<int> Encode(const std::vector<std::string>& tokens,
                        const Vocabulary& vocab);
inline std::vector<int> Encode(const Utterance& u, const Vocabulary& vocab) {
  return Encode(u.tokens, vocab);
}
/// Inverse of Encode with BOS/EOS stripped; UNK decodes to its surface form.
std::vector<std::string> Decode(const std::vector<int>& ids,
                                const Vocabulary& vocab);

struct DatasetBundle {
  std::vector<Utterance> train_id;
  std::vector<Utterance> valid;
  std::vector<Utterance> test;
  std::vector<std::string> labels;       // sorted
  std::vector<std::size_t> class_counts;  // parallel to labels

  /// Index of label in labels; throws std::out_of_range when absent.
  int LabelIndex(std::string_view label) const;
  std::size_t NumClasses() const { return labels.size(); }
};

/// Assembles a bundle, deriving the label set from all labeled rows and
/// class counts from train. Throws if train holds OOD rows.
DatasetBundle MakeBundle(std::vector<Utterance> train,
                         std::vector<Utterance> valid,
                         std::vector<Utterance> test);

/// Keeps only the first separator-delimited component of every label.
DatasetBundle CoarsenLabels(const DatasetBundle& bundle, char separator = '/');

/// Retains a random class subset covering at least coverage_percent of the
/// training rows that is minimal under removal of any retained class. The
/// remaining classes are dropped from train and become OOD in valid/test.
DatasetBundle MakeHoldoutSplit(const DatasetBundle& bundle,
                               double coverage_percent, std::uint64_t seed);

/// Indices of retained labels that MakeHoldoutSplit would pick. Exposed for
/// verification.
std::vector<std::size_t> ChooseRetainedClasses(
    const std::vector<std::size_t>& class_counts, double coverage_percent,
    std::uint64_t seed);

struct OodSplit {
  std::vector<Utterance> valid;
  std::vector<Utterance> test;
};

/// Seeded disjoint split; round(valid_fraction * n) items go to valid.
OodSplit SplitOod(std::vector<Utterance> ood, double valid_fraction,
                  std::uint64_t seed);

/// Default validation share: |valid ID| / (|valid ID| + |test ID|).
double ProportionalValidFraction(std::size_t valid_id, std::size_t test_id);

}  // namespace oodlr

#endif  // OODLR_CORPUS_HPP_
