#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rfp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Rgb = Eigen::Array3d;

enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kNumeric = 4,
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::kInvalidArgument, message);
}

// Axis-aligned box in world units.
struct Aabb {
  Vec3 min = Vec3::Constant(-1.0);
  Vec3 max = Vec3::Constant(1.0);

  Vec3 extent() const { return max - min; }
  bool contains(const Vec3& x) const {
    return (x.array() >= min.array()).all() && (x.array() <= max.array()).all();
  }
  void validate() const {
    require((extent().array() > 0.0).all(), "bounds must have positive extent on every axis");
  }
};

// Slab test. Returns false when the ray misses the box or the hit interval is empty.
bool intersect_aabb(const Aabb& box, const Vec3& origin, const Vec3& dir, double& t_near,
                    double& t_far);

// Warnings are logged and also collected so callers (and tests) can inspect them.
using Warnings = std::vector<std::string>;
void warn(Warnings* sink, const std::string& message);

// Global worker cap; 0 or negative resets to hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Splits [0, n) into contiguous chunks, one per worker. fn(begin, end).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// mt19937_64 with hand-written conversions; std distributions are not
// bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rfp
