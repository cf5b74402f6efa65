#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fawmf/sparse_matrix.hpp"

namespace fawmf {

enum class InputFormat { movielens_dat, tsv, csv };

InputFormat parse_input_format(std::string_view name);

struct InteractionRecord {
  std::string user;
  std::string item;
  double value = 0.0;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct InteractionLog {
  std::vector<InteractionRecord> records;
};

/// Parses `user<sep>item<sep>value[<sep>timestamp]` lines. The separator is
/// "::" for MovieLens .dat files, tab for tsv and comma for csv. Blank lines
/// are skipped; a csv/tsv header line is skipped when it is the first line
/// and its value column is not numeric.
InteractionLog load_interactions(const std::filesystem::path& path, InputFormat format);
InteractionLog parse_interactions(std::string_view text, InputFormat format,
                                  const std::string& source_name = "<memory>");

struct IndexedInteractions {
  SparseBinaryMatrix matrix;
  std::vector<std::string> user_ids;  // dense id -> raw id
  std::vector<std::string> item_ids;
};

/// Any interaction counts as a positive regardless of its value. Dense ids
/// follow first appearance in the log.
IndexedInteractions binarize_and_index(const InteractionLog& log);

/// Items consumed by fewer than min_count users are dropped and the survivors
/// renumbered in their original order. Users are never dropped.
SparseBinaryMatrix filter_min_item_interactions(const SparseBinaryMatrix& x,
                                                std::size_t min_count = 3);
/// Old item ids that survive the filter, in new-id order.
std::vector<Index> surviving_items(const SparseBinaryMatrix& x, std::size_t min_count = 3);

struct FoldSplit {
  SparseBinaryMatrix train;
  SparseBinaryMatrix test;
  std::size_t fold_id = 0;
  std::uint64_t seed = 0;
};

/// Shuffles all positives with Rng(seed) and cuts them into k contiguous
/// parts; part f holds positions [f*nnz/k, (f+1)*nnz/k).
std::vector<FoldSplit> kfold_split(const SparseBinaryMatrix& x, std::size_t k,
                                   std::uint64_t seed);

std::vector<std::size_t> item_popularity(const SparseBinaryMatrix& x);

/// Full pipeline used by the tools: load, binarize, min-count item filter.
IndexedInteractions load_dataset(const std::filesystem::path& path, InputFormat format,
                                 std::size_t min_item_count = 3);

void write_id_map(const std::filesystem::path& path, const std::vector<std::string>& raw_ids);
std::vector<std::string> read_id_map(const std::filesystem::path& path);

}  // namespace fawmf
