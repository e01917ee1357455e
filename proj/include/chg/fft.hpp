#pragma once

// FFTW planner calls serialised behind one mutex (the planner is not reentrant); execution
// stays lock-free.

#include <fftw3.h>

namespace chg {

fftw_plan plan_r2c(int rank, const int* n, double* in, fftw_complex* out);
fftw_plan plan_c2r(int rank, const int* n, fftw_complex* in, double* out);
fftw_plan plan_r2c_1d(int n, double* in, fftw_complex* out);
fftw_plan plan_c2r_1d(int n, fftw_complex* in, double* out);
void destroy_plan(fftw_plan p);

}  // namespace chg
