#include "formctl/errors.hpp"

#include <sstream>

namespace formctl {

namespace {

std::string join_ids(const std::vector<int>& ids) {
    std::ostringstream os;
    for (size_t k = 0; k < ids.size(); ++k) {
        if (k) os << ", ";
        os << ids[k];
    }
    return os.str();
}

}  // namespace

UnassignableFollowers::UnassignableFollowers(std::vector<int> f)
    : Error("layer peeling stalled; unassignable followers: {" + join_ids(f) + "}"),
      followers(std::move(f)) {}

DegenerateNeighborhood::DegenerateNeighborhood(int i)
    : Error("follower " + std::to_string(i) +
            ": designated neighbors are affinely degenerate (nullspace dimension > 1)"),
      follower(i) {}

NotLocalizable::NotLocalizable(int i)
    : Error("follower " + std::to_string(i) + ": constraint is not localizable (|h_ii| below tolerance)"),
      follower(i) {}

CoincidentAgents::CoincidentAgents(int a_, int b_)
    : Error("agents " + std::to_string(a_) + " and " + std::to_string(b_) + " coincide"),
      a(a_), b(b_) {}

DegenerateTriangle::DegenerateTriangle(int a_, int b_, int c_)
    : Error("degenerate triangle (" + std::to_string(a_) + ", " + std::to_string(b_) + ", " +
            std::to_string(c_) + ")"),
      a(a_), b(b_), c(c_) {}

MissingNeighborEstimate::MissingNeighborEstimate(int j)
    : Error("no estimate received from neighbor " + std::to_string(j)), neighbor(j) {}

ParseError::ParseError(const std::string& section_, int line_, const std::string& reason)
    : Error("parse error in [" + section_ + "] line " + std::to_string(line_) + ": " + reason),
      section(section_), line(line_) {}

}  // namespace formctl
