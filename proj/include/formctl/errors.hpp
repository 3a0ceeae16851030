#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace formctl {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- graph ---

struct UnassignableFollowers : Error {
    std::vector<int> followers;
    explicit UnassignableFollowers(std::vector<int> f);
};

// --- formation / geometry ---

struct DimensionMismatch : Error {
    using Error::Error;
};

struct DegenerateNeighborhood : Error {
    int follower;
    explicit DegenerateNeighborhood(int i);
};

struct NotLocalizable : Error {
    int follower;
    explicit NotLocalizable(int i);
};

struct ShapeError : Error {
    using Error::Error;
};

struct Singular : Error {
    using Error::Error;
};

struct OutOfSchedule : Error {
    using Error::Error;
};

// --- measurement ---

struct CoincidentAgents : Error {
    int a, b;
    CoincidentAgents(int a_, int b_);
};

struct NotUnit : Error {
    using Error::Error;
};

// --- displacement ---

struct NotEmbeddable : Error {
    using Error::Error;
};

struct AmbiguousNullspace : Error {
    using Error::Error;
};

struct ZeroReferenceDistance : Error {
    using Error::Error;
};

struct NoPivot : Error {
    using Error::Error;
};

struct DegenerateTriangle : Error {
    int a, b, c;
    DegenerateTriangle(int a_, int b_, int c_);
};

struct CaseUndetermined : Error {
    using Error::Error;
};

// --- control / sim ---

struct MissingNeighborEstimate : Error {
    int neighbor;
    explicit MissingNeighborEstimate(int j);
};

struct NumericalBlowup : Error {
    using Error::Error;
};

struct ScheduleExhausted : Error {
    using Error::Error;
};

// --- cli / io ---

struct ParseError : Error {
    std::string section;
    int line;
    ParseError(const std::string& section_, int line_, const std::string& reason);
};

struct ValidationError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace formctl
