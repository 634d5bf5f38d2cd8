#include "tocflow/core.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace tocflow {

namespace {

// Planner calls are not thread-safe in FFTW; plans are built once under a lock and
// executed through the new-array interface, which is.
std::mutex plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> plan_cache;

fftw_plan get_plan(int n0, int n1, int sign) {
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto key = std::make_tuple(n0, n1, sign);
  auto it = plan_cache.find(key);
  if (it != plan_cache.end()) return it->second;
  std::vector<fftw_complex> in(static_cast<std::size_t>(n0) * n1), out(in.size());
  fftw_plan p = fftw_plan_dft_2d(n0, n1, in.data(), out.data(), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  plan_cache.emplace(key, p);
  return p;
}

}  // namespace

CMat dft2(const CMat& field, FftDir dir) {
  if (field.rows() < 1 || field.cols() < 1) throw ShapeError("dft2: empty field");
  CMat in = field;
  CMat out(field.rows(), field.cols());
  // Column-major storage of an r x c matrix is row-major storage of its transpose, and the
  // 2-D transform commutes with transposition, so planning (cols, rows) gives the right result.
  const int sign = dir == FftDir::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
  fftw_plan p = get_plan(static_cast<int>(field.cols()), static_cast<int>(field.rows()), sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

CMat dft2(const Mat& field, FftDir dir) { return dft2(CMat(field.cast<std::complex<double>>()), dir); }

}  // namespace tocflow
