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
#include "oodlr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "oodlr/rng.hpp"

namespace oodlr {
namespace {

constexpr const char* kReservedSurface[Vocabulary::kNumReserved] = {
    "<pad>", "<unk>", "<s>", "</s>"};

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool IsWordChar(unsigned char c) {
  // Bytes >= 0x80 belong to multi-byte UTF-8 sequences and stay in words.
  return c >= 0x80 || std::isalnum(c) || c == '_';
}

}  // namespace

TsvSchema::TsvSchema() : columns_{Column::kLabel, Column::kText} {}

TsvSchema TsvSchema::Parse(std::string_view spec) {
  TsvSchema schema;
  schema.columns_.clear();
  bool has_text = false;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    if (comma == std::string_view::npos) comma = spec.size();
    std::string name = Trim(spec.substr(start, comma - start));
    if (name == "id") {
      schema.columns_.push_back(Column::kId);
    } else if (name == "label") {
      schema.columns_.push_back(Column::kLabel);
    } else if (name == "text") {
      schema.columns_.push_back(Column::kText);
      has_text = true;
    } else if (!name.empty()) {
      schema.columns_.push_back(Column::kIgnore);
    } else {
      throw std::invalid_argument("empty column name in schema '" +
                                  std::string(spec) + "'");
    }
    start = comma + 1;
  }
  if (!has_text) {
    throw std::invalid_argument("schema '" + std::string(spec) +
                                "' has no text column");
  }
  return schema;
}

std::string TsvSchema::ToString() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    switch (columns_[i]) {
      case Column::kId: out += "id"; break;
      case Column::kLabel: out += "label"; break;
      case Column::kText: out += "text"; break;
      case Column::kIgnore: out += "-"; break;
    }
  }
  return out;
}

namespace {

// Whether rest begins with a common English clitic followed by a non-word
// character or the end of input.
bool StartsClitic(std::string_view rest) {
  for (std::string_view clitic : {"s", "t", "re", "ve", "ll", "d", "m"}) {
    if (rest.size() < clitic.size()) continue;
    bool match = true;
    for (std::size_t j = 0; j < clitic.size(); ++j) {
      match = match && std::tolower(static_cast<unsigned char>(rest[j])) == clitic[j];
    }
    if (match && (rest.size() == clitic.size() ||
                  !IsWordChar(static_cast<unsigned char>(rest[clitic.size()])))) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<std::string> Tokenize(std::string_view raw) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (std::isspace(c)) {
      flush();
    } else if (IsWordChar(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'' && i + 1 < raw.size() &&
               IsWordChar(static_cast<unsigned char>(raw[i + 1])) &&
               (!current.empty() || StartsClitic(raw.substr(i + 1)))) {
      // Clitic: "what's" -> "what", "'s". A detached "'s" stays one token.
      flush();
      current.push_back('\'');
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

std::vector<Utterance> LoadTsv(const std::filesystem::path& path,
                               const TsvSchema& schema,
                               std::int64_t first_id) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Utterance> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t non_blank = 0;
  const auto& cols = schema.columns();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++non_blank;
    auto fields = SplitTabs(line);
    if (fields.size() != cols.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(cols.size()) +
                               " columns, found " +
                               std::to_string(fields.size()));
    }
    Utterance u;
    u.id = first_id + static_cast<std::int64_t>(line_no - 1);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      switch (cols[c]) {
        case TsvSchema::Column::kId: {
          const std::string_view f = fields[c];
          auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), u.id);
          if (ec != std::errc() || ptr != f.data() + f.size()) {
            throw std::runtime_error(path.string() + ":" +
                                     std::to_string(line_no) +
                                     ": bad id '" + std::string(f) + "'");
          }
          break;
        }
        case TsvSchema::Column::kLabel: {
          std::string label = Trim(fields[c]);
          if (label == schema.ood_label()) {
            u.is_ood = true;
          } else if (!label.empty()) {
            u.label = std::move(label);
          }
          break;
        }
        case TsvSchema::Column::kText:
          u.raw = std::string(fields[c]);
          break;
        case TsvSchema::Column::kIgnore:
          break;
      }
    }
    u.tokens = Tokenize(u.raw);
    if (u.tokens.empty()) {
      spdlog::warn("{}:{}: empty text, row dropped", path.string(), line_no);
      continue;
    }
    out.push_back(std::move(u));
  }
  if (non_blank == 0) throw std::runtime_error(path.string() + " is empty");
  return out;
}

void SaveTsv(const std::filesystem::path& path,
             const std::vector<Utterance>& utterances,
             std::string_view ood_label) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& u : utterances) {
    out << u.id << '\t' << (u.is_ood ? std::string(ood_label) : u.label.value_or(""))
        << '\t';
    // Tokens re-joined so the file reloads to identical token sequences.
    for (std::size_t i = 0; i < u.tokens.size(); ++i) {
      if (i) out << ' ';
      out << u.tokens[i];
    }
    out << '\n';
  }
}

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumReserved; ++i) {
    token_to_id_.emplace(kReservedSurface[i], i);
    id_to_token_.emplace_back(kReservedSurface[i]);
    freq_.push_back(0);
  }
}

void Vocabulary::Add(std::string token, std::size_t freq) {
  const int id = static_cast<int>(id_to_token_.size());
  auto [it, inserted] = token_to_id_.emplace(token, id);
  if (!inserted) throw std::invalid_argument("duplicate token '" + token + "'");
  id_to_token_.push_back(std::move(token));
  freq_.push_back(freq);
}

Vocabulary Vocabulary::Build(const std::vector<Utterance>& train,
                             std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& u : train) {
    for (const auto& t : u.tokens) ++counts[t];
  }
  // Order by descending frequency, ties alphabetical, for stable ids.
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(),
                                                          counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (auto& [token, n] : sorted) {
    if (n < min_freq || vocab.Contains(token)) continue;
    vocab.Add(token, n);
  }
  return vocab;
}

int Vocabulary::Id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::Contains(std::string_view token) const {
  return token_to_id_.contains(std::string(token));
}

const std::string& Vocabulary::Token(int id) const {
  return id_to_token_.at(static_cast<std::size_t>(id));
}

std::size_t Vocabulary::Frequency(int id) const {
  return freq_.at(static_cast<std::size_t>(id));
}

std::vector<int> Vocabulary::ContentIds() const {
  std::vector<int> ids(size() - kNumReserved);
  std::iota(ids.begin(), ids.end(), kNumReserved);
  return ids;
}

std::uint64_t Vocabulary::Fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : id_to_token_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= 0xff;  // separator
    h *= 0x100000001b3ull;
  }
  return h;
}

void Vocabulary::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    out << id_to_token_[i] << '\t' << i << '\t' << freq_[i] << '\n';
  }
}

Vocabulary Vocabulary::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = SplitTabs(line);
    if (fields.size() != 3) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected token<TAB>id<TAB>freq");
    }
    const std::size_t id = std::stoull(std::string(fields[1]));
    const std::size_t freq = std::stoull(std::string(fields[2]));
    if (id < kNumReserved) {
      if (fields[0] != kReservedSurface[id]) {
        throw std::runtime_error(path.string() + ": reserved id " +
                                 std::to_string(id) + " has wrong token");
      }
      continue;
    }
    if (id != vocab.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": ids must be consecutive");
    }
    vocab.Add(std::string(fields[0]), freq);
  }
  return vocab;
}

std::vector<int> Encode(const std::vector<std::string>& tokens,
                        const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(Vocabulary::kBos);
  for (const auto& t : tokens) ids.push_back(vocab.Id(t));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<std::string> Decode(const std::vector<int>& ids,
                                const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  for (int id : ids) {
    if (id == Vocabulary::kBos || id == Vocabulary::kEos ||
        id == Vocabulary::kPad) {
      continue;
    }
    tokens.push_back(vocab.Token(id));
  }
  return tokens;
}

int DatasetBundle::LabelIndex(std::string_view label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) {
    throw std::out_of_range("unknown label '" + std::string(label) + "'");
  }
  return static_cast<int>(it - labels.begin());
}

DatasetBundle MakeBundle(std::vector<Utterance> train,
                         std::vector<Utterance> valid,
                         std::vector<Utterance> test) {
  DatasetBundle b;
  b.train_id = std::move(train);
  b.valid = std::move(valid);
  b.test = std::move(test);
  std::map<std::string, std::size_t> counts;
  for (const auto& u : b.train_id) {
    if (u.is_ood) {
      throw std::invalid_argument("training split contains an OOD row (id " +
                                  std::to_string(u.id) + ")");
    }
    if (!u.label) {
      throw std::invalid_argument("training row " + std::to_string(u.id) +
                                  " has no label");
    }
    ++counts[*u.label];
  }
  for (const auto* split : {&b.valid, &b.test}) {
    for (const auto& u : *split) {
      if (u.label) counts.try_emplace(*u.label, 0);
    }
  }
  for (auto& [label, n] : counts) {
    b.labels.push_back(label);
    b.class_counts.push_back(n);
  }
  return b;
}

DatasetBundle CoarsenLabels(const DatasetBundle& bundle, char separator) {
  auto coarsen = [separator](std::vector<Utterance> rows) {
    for (auto& u : rows) {
      if (!u.label) continue;
      const std::string& l = *u.label;
      const std::string head = l.substr(0, l.find(separator));
      if (head.empty()) {
        throw std::invalid_argument("label '" + l + "' has no components");
      }
      u.label = head;
    }
    return rows;
  };
  return MakeBundle(coarsen(bundle.train_id), coarsen(bundle.valid),
                    coarsen(bundle.test));
}

std::vector<std::size_t> ChooseRetainedClasses(
    const std::vector<std::size_t>& class_counts, double coverage_percent,
    std::uint64_t seed) {
  if (!(coverage_percent > 0.0 && coverage_percent < 100.0)) {
    throw std::invalid_argument("coverage percent must be in (0, 100)");
  }
  const std::size_t total =
      std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
  if (total == 0) throw std::invalid_argument("no training rows");
  auto covers = [&](std::size_t kept) {
    return 100.0 * static_cast<double>(kept) >=
           coverage_percent * static_cast<double>(total);
  };

  std::vector<std::size_t> order(class_counts.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::Derive({seed, 0x686f6c646f7574ull});
  rng.Shuffle(std::span<std::size_t>(order));

  std::vector<std::size_t> kept;
  std::size_t covered = 0;
  for (std::size_t c : order) {
    if (covers(covered)) break;
    kept.push_back(c);
    covered += class_counts[c];
  }
  // Prune, smallest first, so that dropping any retained class breaks
  // coverage.
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    return class_counts[a] < class_counts[b];
  });
  while (!kept.empty() && covers(covered - class_counts[kept.front()])) {
    covered -= class_counts[kept.front()];
    kept.erase(kept.begin());
  }
  if (kept.size() == class_counts.size()) {
    throw std::invalid_argument(
        "coverage " + std::to_string(coverage_percent) +
        "% requires every class; no class is left to hold out");
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

DatasetBundle MakeHoldoutSplit(const DatasetBundle& bundle,
                               double coverage_percent, std::uint64_t seed) {
  for (const auto* split : {&bundle.valid, &bundle.test}) {
    for (const auto& u : *split) {
      if (u.is_ood) {
        throw std::invalid_argument(
            "holdout split requires a bundle without OOD rows");
      }
    }
  }
  const auto kept =
      ChooseRetainedClasses(bundle.class_counts, coverage_percent, seed);
  std::vector<bool> retained(bundle.labels.size(), false);
  for (std::size_t c : kept) retained[c] = true;
  auto is_retained = [&](const Utterance& u) {
    return u.label && retained[static_cast<std::size_t>(bundle.LabelIndex(*u.label))];
  };

  std::vector<Utterance> train;
  for (const auto& u : bundle.train_id) {
    if (is_retained(u)) train.push_back(u);
  }
  auto relabel = [&](const std::vector<Utterance>& rows) {
    std::vector<Utterance> out = rows;
    for (auto& u : out) {
      if (!is_retained(u)) {
        u.label.reset();
        u.is_ood = true;
      }
    }
    return out;
  };
  return MakeBundle(std::move(train), relabel(bundle.valid),
                    relabel(bundle.test));
}

OodSplit SplitOod(std::vector<Utterance> ood, double valid_fraction,
                  std::uint64_t seed) {
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw std::invalid_argument("valid_fraction must be in (0, 1)");
  }
  Rng rng = Rng::Derive({seed, 0x6f6f6473706c6974ull});
  rng.Shuffle(std::span<Utterance>(ood));
  const auto n_valid = static_cast<std::size_t>(
      std::llround(valid_fraction * static_cast<double>(ood.size())));
  OodSplit split;
  split.valid.assign(std::make_move_iterator(ood.begin()),
                     std::make_move_iterator(ood.begin() + static_cast<std::ptrdiff_t>(n_valid)));
  split.test.assign(std::make_move_iterator(ood.begin() + static_cast<std::ptrdiff_t>(n_valid)),
                    std::make_move_iterator(ood.end()));
  return split;
}

double ProportionalValidFraction(std::size_t valid_id, std::size_t test_id) {
  if (valid_id + test_id == 0) return 0.5;
  return static_cast<double>(valid_id) / static_cast<double>(valid_id + test_id);
}

}  // namespace oodlr
