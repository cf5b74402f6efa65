#include "fawmf/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "fawmf/errors.hpp"
#include "fawmf/rng.hpp"

namespace fawmf {
namespace {

std::string_view separator(InputFormat format) {
  switch (format) {
    case InputFormat::movielens_dat:
      return "::";
    case InputFormat::tsv:
      return "\t";
    case InputFormat::csv:
      return ",";
  }
  return ",";
}

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

InputFormat parse_input_format(std::string_view name) {
  if (name == "movielens-dat") return InputFormat::movielens_dat;
  if (name == "tsv") return InputFormat::tsv;
  if (name == "csv") return InputFormat::csv;
  throw DomainError("unknown input format '" + std::string(name) +
                    "' (expected movielens-dat, tsv or csv)");
}

InteractionLog parse_interactions(std::string_view text, InputFormat format,
                                  const std::string& source_name) {
  InteractionLog log;
  const std::string_view sep = separator(format);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto fields = split(line, sep);
    if (fields.size() < 3 || fields.size() > 4) {
      throw ParseError(source_name, line_no,
                       "expected 3 or 4 fields, found " + std::to_string(fields.size()));
    }
    InteractionRecord rec;
    rec.user = std::string(fields[0]);
    rec.item = std::string(fields[1]);
    if (!parse_number(fields[2], rec.value)) {
      if (line_no == 1 && format != InputFormat::movielens_dat) continue;  // header
      throw ParseError(source_name, line_no, "value '" + std::string(fields[2]) + "' is not a number");
    }
    if (rec.user.empty() || rec.item.empty()) {
      throw ParseError(source_name, line_no, "empty user or item id");
    }
    if (!std::isfinite(rec.value)) {
      throw ParseError(source_name, line_no, "value is not finite");
    }
    if (fields.size() == 4) {
      std::int64_t ts = 0;
      if (!parse_number(fields[3], ts)) {
        throw ParseError(source_name, line_no,
                         "timestamp '" + std::string(fields[3]) + "' is not an integer");
      }
      rec.timestamp = ts;
    }
    log.records.push_back(std::move(rec));
  }
  return log;
}

InteractionLog load_interactions(const std::filesystem::path& path, InputFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed on " + path.string());
  return parse_interactions(buf.str(), format, path.string());
}

IndexedInteractions binarize_and_index(const InteractionLog& log) {
  if (log.records.empty()) throw DomainError("interaction log is empty");
  IndexedInteractions out;
  std::unordered_map<std::string, Index> users;
  std::unordered_map<std::string, Index> items;
  std::vector<Entry> entries;
  entries.reserve(log.records.size());
  for (const auto& rec : log.records) {
    auto [u, new_user] = users.try_emplace(rec.user, static_cast<Index>(users.size()));
    if (new_user) out.user_ids.push_back(rec.user);
    auto [i, new_item] = items.try_emplace(rec.item, static_cast<Index>(items.size()));
    if (new_item) out.item_ids.push_back(rec.item);
    entries.emplace_back(u->second, i->second);
  }
  out.matrix = SparseBinaryMatrix(users.size(), items.size(), std::move(entries));
  return out;
}

std::vector<Index> surviving_items(const SparseBinaryMatrix& x, std::size_t min_count) {
  if (min_count < 1) throw DomainError("min_count must be at least 1");
  std::vector<Index> kept;
  for (std::size_t j = 0; j < x.n_items(); ++j) {
    if (x.col(j).size() >= min_count) kept.push_back(static_cast<Index>(j));
  }
  return kept;
}

SparseBinaryMatrix filter_min_item_interactions(const SparseBinaryMatrix& x,
                                                std::size_t min_count) {
  const auto kept = surviving_items(x, min_count);
  if (kept.empty()) {
    throw DomainError("no item has at least " + std::to_string(min_count) + " interactions");
  }
  std::vector<Entry> entries;
  for (std::size_t new_id = 0; new_id < kept.size(); ++new_id) {
    for (Index u : x.col(kept[new_id])) entries.emplace_back(u, static_cast<Index>(new_id));
  }
  return SparseBinaryMatrix(x.n_users(), kept.size(), std::move(entries));
}

std::vector<FoldSplit> kfold_split(const SparseBinaryMatrix& x, std::size_t k,
                                   std::uint64_t seed) {
  if (k < 2) throw DomainError("k-fold split needs k >= 2");
  if (k > x.nnz()) {
    throw DomainError("cannot split " + std::to_string(x.nnz()) + " positives into " +
                      std::to_string(k) + " folds");
  }
  auto entries = x.entries();
  Rng rng(seed);
  rng.shuffle(std::span<Entry>(entries));

  const std::size_t total = entries.size();
  std::vector<FoldSplit> folds;
  folds.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * total / k;
    const std::size_t hi = (f + 1) * total / k;
    std::vector<Entry> train;
    train.reserve(total - (hi - lo));
    train.insert(train.end(), entries.begin(), entries.begin() + lo);
    train.insert(train.end(), entries.begin() + hi, entries.end());
    std::vector<Entry> test(entries.begin() + lo, entries.begin() + hi);
    folds.push_back({SparseBinaryMatrix(x.n_users(), x.n_items(), std::move(train)),
                     SparseBinaryMatrix(x.n_users(), x.n_items(), std::move(test)), f, seed});
  }
  return folds;
}

std::vector<std::size_t> item_popularity(const SparseBinaryMatrix& x) {
  std::vector<std::size_t> pop(x.n_items());
  for (std::size_t j = 0; j < x.n_items(); ++j) pop[j] = x.col(j).size();
  return pop;
}

IndexedInteractions load_dataset(const std::filesystem::path& path, InputFormat format,
                                 std::size_t min_item_count) {
  auto indexed = binarize_and_index(load_interactions(path, format));
  const auto kept = surviving_items(indexed.matrix, min_item_count);
  std::vector<std::string> kept_ids;
  kept_ids.reserve(kept.size());
  for (Index j : kept) kept_ids.push_back(indexed.item_ids[j]);
  indexed.matrix = filter_min_item_interactions(indexed.matrix, min_item_count);
  indexed.item_ids = std::move(kept_ids);
  return indexed;
}

void write_id_map(const std::filesystem::path& path, const std::vector<std::string>& raw_ids) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < raw_ids.size(); ++i) out << i << '\t' << raw_ids[i] << '\n';
  if (!out) throw IoError("write failed on " + path.string());
}

std::vector<std::string> read_id_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    std::size_t dense = 0;
    if (tab == std::string::npos || !parse_number(std::string_view(line).substr(0, tab), dense) ||
        dense != ids.size()) {
      throw ParseError(path.string(), line_no, "expected '<dense_id>\\t<raw_id>' in order");
    }
    ids.push_back(line.substr(tab + 1));
  }
  return ids;
}

}  // namespace fawmf
