#include "formctl/graph.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace formctl {

const std::vector<AgentId>& FormationGraph::neighbors(AgentId i) const {
    auto it = neighbor_sets.find(i);
    if (it == neighbor_sets.end())
        throw ValidationError("no designated neighbor set for follower " + std::to_string(i));
    return it->second;
}

std::vector<AgentId> FormationGraph::smaller_out_neighbors(AgentId i) const {
    std::vector<AgentId> out;
    for (const auto& [a, b] : edges)
        if (a == i && b < i) out.push_back(b);
    std::sort(out.begin(), out.end());
    return out;
}

std::map<AgentId, int> compute_layers(const std::set<std::pair<AgentId, AgentId>>& edges,
                                      int n, int m, int d) {
    std::map<AgentId, int> layer;
    for (AgentId i = 1; i <= m; ++i) layer[i] = 1;

    std::map<AgentId, std::vector<AgentId>> smaller_out;
    for (AgentId i = m + 1; i <= n; ++i) smaller_out[i] = {};
    for (const auto& [a, b] : edges)
        if (a > m && a <= n && b < a) smaller_out[a].push_back(b);

    int assigned = m;
    for (int g = 2; assigned < n; ++g) {
        // Candidates are judged against the assignment frozen at the start of
        // the round: a follower needs d+1 smaller-index out-neighbors placed
        // in layers <= g (all of which are, at this point, < g).
        std::vector<AgentId> round;
        for (AgentId i = m + 1; i <= n; ++i) {
            if (layer.count(i)) continue;
            int ready = 0;
            for (AgentId j : smaller_out[i])
                if (layer.count(j)) ++ready;
            if (ready >= d + 1) round.push_back(i);
        }
        if (round.empty()) {
            std::vector<AgentId> stuck;
            for (AgentId i = m + 1; i <= n; ++i)
                if (!layer.count(i)) stuck.push_back(i);
            throw UnassignableFollowers(stuck);
        }
        for (AgentId i : round) layer[i] = g;
        assigned += static_cast<int>(round.size());
    }
    return layer;
}

namespace {

// Unit-capacity max flow (BFS augmentation). Node counts here are tiny, so
// Edmonds-Karp is plenty.
struct FlowNet {
    struct Arc {
        int to;
        int cap;
        int rev;
    };
    std::vector<std::vector<Arc>> adj;

    explicit FlowNet(int nodes) : adj(nodes) {}

    void add_arc(int u, int v, int cap) {
        adj[u].push_back({v, cap, static_cast<int>(adj[v].size())});
        adj[v].push_back({u, 0, static_cast<int>(adj[u].size()) - 1});
    }

    int max_flow(int s, int t) {
        int flow = 0;
        while (true) {
            std::vector<std::pair<int, int>> parent(adj.size(), {-1, -1});
            std::queue<int> q;
            q.push(s);
            parent[s] = {s, -1};
            while (!q.empty() && parent[t].first < 0) {
                int u = q.front();
                q.pop();
                for (size_t k = 0; k < adj[u].size(); ++k) {
                    const Arc& a = adj[u][k];
                    if (a.cap > 0 && parent[a.to].first < 0) {
                        parent[a.to] = {u, static_cast<int>(k)};
                        q.push(a.to);
                    }
                }
            }
            if (parent[t].first < 0) break;
            for (int v = t; v != s;) {
                auto [u, k] = parent[v];
                adj[u][k].cap -= 1;
                adj[adj[u][k].to][adj[u][k].rev].cap += 1;
                v = u;
            }
            ++flow;
        }
        return flow;
    }
};

}  // namespace

int disjoint_path_count(const FormationGraph& graph, AgentId follower) {
    // Split every agent except the target into in/out halves with unit
    // capacity; information flows j -> i along each edge (i, j).
    // node 0 = super-source, 2v-1 = v_in, 2v = v_out, sink = follower_in.
    const int n = graph.n;
    FlowNet net(2 * n + 1);
    auto vin = [](AgentId v) { return 2 * v - 1; };
    auto vout = [](AgentId v) { return 2 * v; };

    for (AgentId v = 1; v <= n; ++v) {
        if (v == follower)
            net.add_arc(vin(v), vout(v), n);  // target itself is never removed
        else
            net.add_arc(vin(v), vout(v), 1);
    }
    for (AgentId l = 1; l <= graph.m; ++l) net.add_arc(0, vin(l), 1);
    for (const auto& [i, j] : graph.edges) net.add_arc(vout(j), vin(i), 1);

    return net.max_flow(0, vin(follower));
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    if (valid()) {
        os << "graph: valid\n";
        return os.str();
    }
    for (const auto& v : violations) {
        os << "violation: " << v.what;
        if (!v.agents.empty()) {
            os << " [agents:";
            for (AgentId a : v.agents) os << " " << a;
            os << "]";
        }
        os << "\n";
    }
    return os.str();
}

ValidationReport validate_graph(const FormationGraph& graph) {
    ValidationReport report;
    auto flag = [&](std::string what, std::vector<AgentId> agents = {}) {
        report.violations.push_back({std::move(what), std::move(agents)});
    };

    if (graph.n < 1 || graph.m < 1 || graph.m > graph.n)
        flag("agent/leader counts inconsistent (n=" + std::to_string(graph.n) +
             ", m=" + std::to_string(graph.m) + ")");
    if (graph.d < 2) flag("ambient dimension must be >= 2");

    // Layer map: verify a supplied one, otherwise peel.
    if (!graph.layers.empty()) {
        report.layers = graph.layers;
        for (AgentId i = 1; i <= graph.m; ++i) {
            auto it = graph.layers.find(i);
            if (it == graph.layers.end() || it->second != 1)
                flag("leader not in layer 1", {i});
        }
        for (AgentId i = graph.m + 1; i <= graph.n; ++i) {
            auto it = graph.layers.find(i);
            if (it == graph.layers.end())
                flag("follower has no layer", {i});
            else if (it->second < 2)
                flag("follower assigned to the leader layer", {i});
        }
        for (const auto& [agent, g] : graph.layers)
            if (agent < 1 || agent > graph.n)
                flag("layer map references unknown agent", {agent});
    } else {
        try {
            report.layers = compute_layers(graph.edges, graph.n, graph.m, graph.d);
        } catch (const UnassignableFollowers& e) {
            flag("layer peeling stalled before covering all followers", e.followers);
        }
    }

    for (AgentId i = graph.m + 1; i <= graph.n; ++i) {
        auto it = graph.neighbor_sets.find(i);
        if (it == graph.neighbor_sets.end()) {
            flag("follower has no designated neighbor set", {i});
            continue;
        }
        const auto& nbrs = it->second;
        if (static_cast<int>(nbrs.size()) < graph.d + 1)
            flag("follower has fewer than d+1 designated neighbors", {i});
        for (AgentId j : nbrs) {
            if (j >= i) flag("designated neighbor index not smaller than follower", {i, j});
            if (!graph.has_edge(i, j)) flag("designated neighbor without an edge", {i, j});
            auto li = report.layers.find(i);
            auto lj = report.layers.find(j);
            if (li != report.layers.end() && lj != report.layers.end() && lj->second > li->second)
                flag("designated neighbor in a deeper layer than its follower", {i, j});
        }
    }

    for (AgentId i = graph.m + 1; i <= graph.n; ++i) {
        int paths = disjoint_path_count(graph, i);
        if (paths < graph.d + 1)
            flag("follower is not d+1-reachable from the leader set (" + std::to_string(paths) +
                 " disjoint paths)", {i});
    }

    return report;
}

}  // namespace formctl
