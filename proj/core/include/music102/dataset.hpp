#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "music102/piece.hpp"

namespace music102 {

// Corpus files hold one piece JSON per line. load validates every piece and
// rejects duplicate ids; both throw Error on I/O failure.
std::vector<Piece> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<Piece>& pieces);

struct DatasetSplit {
  std::vector<std::string> train, val, test;
};

// 707:100:100 proportions at any corpus size: val and test each get
// max(1, floor(n * 100 / 909)) pieces, the remainder trains. Ids are sorted
// before the seeded shuffle, so the split ignores input order. Throws on
// fewer than three pieces.
DatasetSplit split_dataset(std::vector<std::string> ids, uint64_t seed);

}  // namespace music102
