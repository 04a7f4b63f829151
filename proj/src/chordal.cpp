//
//  chordal.cpp
//

#include "orpd/chordal.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace orpd {

SparsityGraph SparsityGraph::from_edges(int n,
                                        std::vector<std::pair<int, int>> e) {
  SparsityGraph g;
  g.n = n;
  for (auto& [a, b] : e) {
    if (a == b) continue;
    if (a > b) std::swap(a, b);
  }
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  e.erase(std::remove_if(e.begin(), e.end(),
                         [](auto& p) { return p.first == p.second; }),
          e.end());
  g.edges = std::move(e);
  g.adj.assign(n, {});
  for (auto [a, b] : g.edges) {
    g.adj[a].push_back(b);
    g.adj[b].push_back(a);
  }
  for (auto& l : g.adj) std::sort(l.begin(), l.end());
  return g;
}

SparsityGraph build_graph(const Network& net) {
  std::vector<std::pair<int, int>> e;
  e.reserve(net.branches.size());
  for (const Branch& br : net.branches) e.emplace_back(br.from_bus, br.to_bus);
  return SparsityGraph::from_edges(net.bus_count(), std::move(e));
}

namespace {

// elimination with minimum-degree pivoting, returning the fill graph's
// higher-neighborhood of every vertex
struct Elimination {
  std::vector<int> order;
  std::vector<std::vector<int>> madj;  // higher (later-eliminated) neighbors
  int fill_edges = 0;
};

Elimination min_degree_eliminate(const SparsityGraph& g) {
  Elimination out;
  out.order.reserve(g.n);
  out.madj.resize(g.n);
  std::vector<std::set<int>> adj(g.n);
  for (int v = 0; v < g.n; ++v) adj[v] = {g.adj[v].begin(), g.adj[v].end()};
  std::vector<char> gone(g.n, 0);

  for (int step = 0; step < g.n; ++step) {
    int best = -1;
    size_t best_deg = SIZE_MAX;
    for (int v = 0; v < g.n; ++v)
      if (!gone[v] && adj[v].size() < best_deg) {
        best = v;
        best_deg = adj[v].size();
      }
    int v = best;
    gone[v] = 1;
    out.order.push_back(v);
    out.madj[v] = {adj[v].begin(), adj[v].end()};
    // connect remaining neighbors pairwise
    std::vector<int> nbrs(adj[v].begin(), adj[v].end());
    for (size_t i = 0; i < nbrs.size(); ++i) {
      adj[nbrs[i]].erase(v);
      for (size_t j = i + 1; j < nbrs.size(); ++j) {
        if (adj[nbrs[i]].insert(nbrs[j]).second) {
          adj[nbrs[j]].insert(nbrs[i]);
          ++out.fill_edges;
        }
      }
    }
    adj[v].clear();
  }
  return out;
}

long long entry_count(size_t s) {
  return static_cast<long long>(s) * (s + 1) / 2;
}

// drop cliques contained in another; candidates are restricted to earlier
// eliminated fill-neighbors, which is sufficient for PEO clique families,
// then a final full sweep guards the merged sets
std::vector<std::vector<int>> drop_contained(
    std::vector<std::vector<int>> cliques) {
  std::sort(cliques.begin(), cliques.end(),
            [](const auto& a, const auto& b) {
              return a.size() != b.size() ? a.size() > b.size() : a < b;
            });
  std::vector<std::vector<int>> kept;
  for (const auto& c : cliques) {
    bool contained = false;
    for (const auto& k : kept)
      if (std::includes(k.begin(), k.end(), c.begin(), c.end())) {
        contained = true;
        break;
      }
    if (!contained) kept.push_back(c);
  }
  return kept;
}

}  // namespace

CliqueCover chordal_extension(const SparsityGraph& g,
                              const ChordalOptions& opts) {
  CliqueCover cover;
  if (g.n == 0) return cover;
  Elimination elim = min_degree_eliminate(g);
  cover.fill_edges = elim.fill_edges;
  cover.elimination_order = elim.order;

  std::vector<std::vector<int>> cands;
  cands.reserve(g.n);
  for (int v : elim.order) {
    std::vector<int> c = elim.madj[v];
    c.push_back(v);
    std::sort(c.begin(), c.end());
    cands.push_back(std::move(c));
  }
  cover.cliques = drop_contained(std::move(cands));

  if (opts.merge_cliques && cover.cliques.size() > 1) {
    // max-weight spanning tree over the clique intersection graph
    auto& cl = cover.cliques;
    auto isect = [&](const std::vector<int>& a, const std::vector<int>& b) {
      std::vector<int> out;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                            std::back_inserter(out));
      return out;
    };
    bool merged_any = true;
    while (merged_any) {
      merged_any = false;
      for (size_t i = 0; i < cl.size() && !merged_any; ++i) {
        for (size_t j = i + 1; j < cl.size() && !merged_any; ++j) {
          auto common = isect(cl[i], cl[j]);
          if (common.empty()) continue;
          std::vector<int> uni;
          std::set_union(cl[i].begin(), cl[i].end(), cl[j].begin(),
                         cl[j].end(), std::back_inserter(uni));
          if (2 * static_cast<int>(uni.size()) >
              opts.max_merged_embedded_side)
            continue;
          long long before = entry_count(cl[i].size()) +
                             entry_count(cl[j].size()) -
                             entry_count(common.size());
          long long after = entry_count(uni.size());
          if (static_cast<double>(after - before) >
              opts.max_merge_fill_ratio * static_cast<double>(before))
            continue;
          cl[i] = std::move(uni);
          cl.erase(cl.begin() + j);
          merged_any = true;
        }
      }
    }
    cover.cliques = drop_contained(std::move(cover.cliques));
  }

  // deterministic order for reproducible programs
  std::sort(cover.cliques.begin(), cover.cliques.end());
  return cover;
}

bool is_chordal(const SparsityGraph& g) {
  // maximum cardinality search, then perfect-elimination check
  std::vector<int> weight(g.n, 0), order;
  std::vector<char> seen(g.n, 0);
  std::vector<int> pos(g.n, -1);
  for (int step = 0; step < g.n; ++step) {
    int best = -1, bw = -1;
    for (int v = 0; v < g.n; ++v)
      if (!seen[v] && weight[v] > bw) {
        bw = weight[v];
        best = v;
      }
    seen[best] = 1;
    order.push_back(best);
    for (int u : g.adj[best])
      if (!seen[u]) ++weight[u];
  }
  // order is an MCS order; reverse gives candidate PEO
  std::reverse(order.begin(), order.end());
  for (int i = 0; i < g.n; ++i) pos[order[i]] = i;

  std::vector<std::set<int>> adj(g.n);
  for (int v = 0; v < g.n; ++v) adj[v] = {g.adj[v].begin(), g.adj[v].end()};
  for (int i = 0; i < g.n; ++i) {
    int v = order[i];
    // later neighbors of v in the PEO must form a clique via the earliest
    int m = -1, mpos = g.n + 1;
    std::vector<int> later;
    for (int u : g.adj[v])
      if (pos[u] > i) {
        later.push_back(u);
        if (pos[u] < mpos) {
          mpos = pos[u];
          m = u;
        }
      }
    for (int u : later)
      if (u != m && !adj[m].count(u)) return false;
  }
  return true;
}

void decompose_psd(ConeProgram& prog, const HermitianBlock& V,
                   const CliqueCover& cover) {
  for (const auto& clique : cover.cliques) {
    for (int v : clique)
      if (v < 0 || v >= V.side()) throw CliqueVertexOutOfRange();
    HermitianBlock sub(static_cast<int>(clique.size()));
    for (size_t i = 0; i < clique.size(); ++i)
      for (size_t j = 0; j <= i; ++j)
        sub.set_entry(static_cast<int>(i), static_cast<int>(j),
                      V.entry(clique[i], clique[j]));
    add_hermitian_psd(prog, sub);
  }
}

std::string to_dot(const SparsityGraph& g, const CliqueCover& cover) {
  std::ostringstream ss;
  ss << "graph chordal {\n";
  std::set<std::pair<int, int>> orig(g.edges.begin(), g.edges.end());
  std::set<std::pair<int, int>> all;
  for (const auto& c : cover.cliques)
    for (size_t i = 0; i < c.size(); ++i)
      for (size_t j = i + 1; j < c.size(); ++j)
        all.insert({c[j] > c[i] ? c[i] : c[j], c[j] > c[i] ? c[j] : c[i]});
  for (auto [a, b] : all) {
    ss << "  " << a << " -- " << b;
    if (!orig.count({a, b})) ss << " [style=dashed]";  // fill edge
    ss << ";\n";
  }
  ss << "}\n";
  return ss.str();
}

}  // namespace orpd
