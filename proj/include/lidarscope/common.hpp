#pragma once

#include <stdexcept>
#include <string>

namespace lidarscope {

constexpr double kPi = 3.14159265358979323846;

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

// Wraps an angle to [0, 2*pi).
double wrap_two_pi(double a);

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Error categories mapped to CLI exit codes (2/3/4).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lidarscope
