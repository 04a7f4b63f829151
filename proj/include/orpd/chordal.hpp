//
//  chordal.hpp
//
//  Sparsity-graph machinery for decomposed PSD constraints: chordal
//  extension by minimum-degree elimination, maximal cliques, optional
//  clique merging, and the per-clique decomposition of a Hermitian block.
//

#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "orpd/cone_program.hpp"
#include "orpd/network.hpp"

namespace orpd {

struct SparsityGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // k < m, no duplicates
  std::vector<std::vector<int>> adj;       // sorted neighbor lists

  static SparsityGraph from_edges(int n, std::vector<std::pair<int, int>> e);
};

// one vertex per bus, one edge per distinct branch endpoint pair
SparsityGraph build_graph(const Network& net);

struct CliqueCover {
  std::vector<std::vector<int>> cliques;  // sorted vertex sets
  int fill_edges = 0;
  std::vector<int> elimination_order;
};

struct ChordalOptions {
  bool merge_cliques = true;
  int max_merged_embedded_side = 24;  // 2 * clique size
  double max_merge_fill_ratio = 0.10;
};

// Chordal extension via minimum-degree elimination (deterministic
// tie-break on vertex index) and maximal-clique extraction.
CliqueCover chordal_extension(const SparsityGraph& g,
                              const ChordalOptions& opts = {});

// true if the graph admits a perfect elimination ordering (MCS test)
bool is_chordal(const SparsityGraph& g);

class CliqueVertexOutOfRange : public std::runtime_error {
 public:
  CliqueVertexOutOfRange()
      : std::runtime_error("clique vertex outside the Hermitian block") {}
};

// Emits one embedded Hermitian PSD block per clique, wired to the entries
// of V (shared handles link clique overlaps automatically).
void decompose_psd(ConeProgram& prog, const HermitianBlock& V,
                   const CliqueCover& cover);

// DOT dump of the extension for inspection.
std::string to_dot(const SparsityGraph& g, const CliqueCover& cover);

}  // namespace orpd
