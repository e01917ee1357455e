#include "chg/fft.hpp"

#include <mutex>

namespace chg {

namespace {
std::mutex& planner() {
    static std::mutex m;
    return m;
}
}  // namespace

fftw_plan plan_r2c(int rank, const int* n, double* in, fftw_complex* out) {
    std::lock_guard<std::mutex> lk(planner());
    return fftw_plan_dft_r2c(rank, n, in, out, FFTW_ESTIMATE);
}

fftw_plan plan_c2r(int rank, const int* n, fftw_complex* in, double* out) {
    std::lock_guard<std::mutex> lk(planner());
    return fftw_plan_dft_c2r(rank, n, in, out, FFTW_ESTIMATE);
}

fftw_plan plan_r2c_1d(int n, double* in, fftw_complex* out) {
    std::lock_guard<std::mutex> lk(planner());
    return fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
}

fftw_plan plan_c2r_1d(int n, fftw_complex* in, double* out) {
    std::lock_guard<std::mutex> lk(planner());
    return fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE);
}

void destroy_plan(fftw_plan p) {
    std::lock_guard<std::mutex> lk(planner());
    fftw_destroy_plan(p);
}

}  // namespace chg
