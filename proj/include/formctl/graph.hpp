#pragma once

#include "formctl/errors.hpp"
#include "formctl/types.hpp"

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace formctl {

// Directed sensing/communication graph with layer assignment.
// Edge (i, j) means agent i obtains information from agent j.
// Agents are 1-indexed; leaders are 1..m; followers are m+1..n.
struct FormationGraph {
    int n = 0;  // agent count
    int m = 0;  // leader count
    int d = 2;  // ambient dimension (>= 2)
    std::set<std::pair<AgentId, AgentId>> edges;
    std::map<AgentId, int> layers;                         // agent -> layer in 1..kappa
    std::map<AgentId, std::vector<AgentId>> neighbor_sets; // follower -> ordered designated neighbors

    bool is_leader(AgentId i) const { return i >= 1 && i <= m; }
    bool is_follower(AgentId i) const { return i > m && i <= n; }
    int follower_count() const { return n - m; }
    bool has_edge(AgentId i, AgentId j) const { return edges.count({i, j}) > 0; }

    // Designated neighbors of follower i (throws if none are declared).
    const std::vector<AgentId>& neighbors(AgentId i) const;

    // Out-neighbors of i with smaller index, in increasing order.
    std::vector<AgentId> smaller_out_neighbors(AgentId i) const;
};

// Hierarchical decomposition by greedy peeling. Layer 1 is the leader set;
// round g >= 2 assigns every still-unassigned follower that has at least
// d+1 smaller-index out-neighbors already placed in earlier rounds.
// Throws UnassignableFollowers if the rounds stall before covering everyone.
std::map<AgentId, int> compute_layers(const std::set<std::pair<AgentId, AgentId>>& edges,
                                      int n, int m, int d);

// Maximum number of internally vertex-disjoint paths from the leader set to
// follower i, by unit-capacity max flow on the node-split graph with a
// super-source attached to all leaders. Returns 0 if unreachable.
int disjoint_path_count(const FormationGraph& graph, AgentId follower);

struct Violation {
    std::string what;
    std::vector<AgentId> agents;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::map<AgentId, int> layers;  // verified input layers, or the peeled assignment
    bool valid() const { return violations.empty(); }
    std::string to_string() const;
};

// Checks every FormationGraph invariant; violations go in the report.
// A supplied layer map is verified, not overwritten; an empty one is
// computed by peeling.
ValidationReport validate_graph(const FormationGraph& graph);

}  // namespace formctl
