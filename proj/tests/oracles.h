#pragma once

// Slow, direct reference computations used to check the library.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace oracle {

// Kendall tau-b by enumerating every pair.
inline std::optional<double> kendall_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  std::int64_t score = 0, untied_x = 0, untied_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const int sx = (x[i] < x[j]) - (x[i] > x[j]);
      const int sy = (y[i] < y[j]) - (y[i] > y[j]);
      score += sx * sy;
      untied_x += sx != 0;
      untied_y += sy != 0;
    }
  }
  if (untied_x == 0 || untied_y == 0) return std::nullopt;
  return static_cast<double>(score) /
         std::sqrt(static_cast<double>(untied_x) * static_cast<double>(untied_y));
}

// Slope from the 2x2 normal equations [n sum_t; sum_t sum_tt] b = [sum_v; sum_tv].
inline double normal_equation_slope(const std::vector<double>& t, const std::vector<double>& v) {
  long double n = t.size(), st = 0, stt = 0, sv = 0, stv = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    stt += static_cast<long double>(t[i]) * t[i];
    sv += v[i];
    stv += static_cast<long double>(t[i]) * v[i];
  }
  return static_cast<double>((n * stv - st * sv) / (n * stt - st * st));
}

// Smoothed points for the slope: per window start j, mean time and mean
// deviation of its valid samples. Written from scratch over plain vectors.
inline bool smoothed_points(const std::vector<double>& f, const std::vector<bool>& gap, double f_ref,
                            int window, int smooth, std::vector<double>& t, std::vector<double>& v) {
  for (int j = 0; j + smooth <= window; ++j) {
    double st = 0, sv = 0;
    int c = 0;
    for (int k = j; k < j + smooth; ++k) {
      if (gap[k]) continue;
      st += k;
      sv += f[k] - f_ref;
      ++c;
    }
    if (c == 0) continue;
    t.push_back(st / c);
    v.push_back(sv / c);
  }
  return t.size() >= 2;
}

inline std::optional<double> nadir_scan(const std::vector<double>& f, const std::vector<bool>& gap,
                                        double f_ref) {
  std::optional<double> best;
  double best_abs = -1.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (gap[i]) continue;
    if (std::abs(f[i] - f_ref) > best_abs) {
      best_abs = std::abs(f[i] - f_ref);
      best = f[i] - f_ref;
    }
  }
  return best;
}

// Kahan-compensated mean of squared deviations.
inline std::optional<double> msd_kahan(const std::vector<double>& f, const std::vector<bool>& gap,
                                       double f_ref) {
  double sum = 0, comp = 0;
  int n = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (gap[i]) continue;
    const double d = f[i] - f_ref;
    const double y = d * d - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

inline std::optional<double> integral_kahan(const std::vector<double>& f, const std::vector<bool>& gap,
                                            double f_ref) {
  double sum = 0, comp = 0;
  int n = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (gap[i]) continue;
    const double y = (f[i] - f_ref) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum;
}

// |a - b| within abs or rel tolerance.
inline bool close(double a, double b, double rel, double abs_tol = 1e-12) {
  const double d = std::abs(a - b);
  return d <= abs_tol || d <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace oracle
