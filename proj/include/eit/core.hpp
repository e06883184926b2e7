#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace eit {

inline constexpr double kPi = 3.1415926535897932384626433832795;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

/// Error taxonomy shared by the library and the command-line front end.
/// The kinds map onto the CLI exit codes: Config -> 2, DataMismatch -> 3,
/// Resolution -> 4, MissingArtifact -> 5, everything else -> 1.
enum class ErrorKind {
    Config,
    Geometry,
    Resolution,
    Pattern,
    Solver,
    Degenerate,
    DataMismatch,
    MissingArtifact,
    Internal,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
            case ErrorKind::Config:
            case ErrorKind::Geometry:
            case ErrorKind::Pattern:
                return 2;
            case ErrorKind::DataMismatch:
                return 3;
            case ErrorKind::Resolution:
                return 4;
            case ErrorKind::MissingArtifact:
                return 5;
            default:
                return 1;
        }
    }

    const char* kind_name() const {
        switch (kind_) {
            case ErrorKind::Config: return "config";
            case ErrorKind::Geometry: return "geometry";
            case ErrorKind::Resolution: return "resolution";
            case ErrorKind::Pattern: return "pattern";
            case ErrorKind::Solver: return "solver";
            case ErrorKind::Degenerate: return "degenerate";
            case ErrorKind::DataMismatch: return "data-mismatch";
            case ErrorKind::MissingArtifact: return "missing-artifact";
            default: return "internal";
        }
    }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
    if (!cond) fail(kind, message);
}

/// Tissue label carried per mesh element.
enum class RegionTag : std::uint8_t { Other = 0, Fat = 1, Muscle = 2, Bone = 3, Internal = 4 };

const char* region_tag_name(RegionTag tag);
RegionTag region_tag_from_name(const std::string& name);

/// splitmix64 mix step; used to derive independent per-frame noise seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace eit
