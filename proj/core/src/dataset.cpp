#include "music102/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "music102/errors.hpp"
#include "music102/rng.hpp"

namespace music102 {

std::vector<Piece> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_corpus: cannot open '" + path + "'");
  std::vector<Piece> pieces;
  std::unordered_set<std::string> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Piece p;
    try {
      p = piece_from_json(line);
    } catch (const Error& e) {
      throw Error("load_corpus: " + path + ":" + std::to_string(line_no) +
                  ": " + e.what());
    }
    if (!seen.insert(p.id).second)
      throw Error("load_corpus: duplicate piece id '" + p.id + "'");
    pieces.push_back(std::move(p));
  }
  return pieces;
}

void save_corpus(const std::string& path, const std::vector<Piece>& pieces) {
  std::ofstream out(path);
  if (!out) throw Error("save_corpus: cannot open '" + path + "'");
  for (const Piece& p : pieces) out << piece_to_json(p) << '\n';
  if (!out) throw Error("save_corpus: write failed on '" + path + "'");
}

DatasetSplit split_dataset(std::vector<std::string> ids, uint64_t seed) {
  const size_t n = ids.size();
  if (n < 3) throw Error("split_dataset: need at least 3 pieces");
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(ids);
  const size_t held = std::max<size_t>(1, n * 100 / 909);
  DatasetSplit split;
  split.train.assign(ids.begin(), ids.end() - 2 * held);
  split.val.assign(ids.end() - 2 * held, ids.end() - held);
  split.test.assign(ids.end() - held, ids.end());
  return split;
}

}  // namespace music102
