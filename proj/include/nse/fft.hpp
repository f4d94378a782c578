#pragma once

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "nse/domain.hpp"

namespace nse {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Complex-to-complex 3D FFT workspace for one grid size. Plans are created
/// once under a global lock; execution uses the new-array interface and is
/// safe as long as each thread owns its workspace.
///
/// Convention: u(x) = sum_k uhat(k) exp(+2*pi*i k.x/L), so forward = FFTW
/// forward scaled by 1/N^3 and backward = FFTW backward unscaled.
class FftWorkspace {
public:
    explicit FftWorkspace(int N) : N_(N), buf_(static_cast<std::size_t>(N) * N * N) {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
        fwd_ = fftw_plan_dft_3d(N, N, N, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_3d(N, N, N, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~FftWorkspace() {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    FftWorkspace(const FftWorkspace&) = delete;
    FftWorkspace& operator=(const FftWorkspace&) = delete;

    int size() const { return N_; }

    // physical -> coefficients (normalized by 1/N^3)
    void forward(const double* phys, complexd* spec) {
        const std::size_t n = buf_.size();
        for (std::size_t m = 0; m < n; ++m) buf_[m] = complexd(phys[m], 0.0);
        run(fwd_);
        const double scale = 1.0 / static_cast<double>(n);
        for (std::size_t m = 0; m < n; ++m) spec[m] = buf_[m] * scale;
    }

    // coefficients -> physical (real part; imaginary part is round-off)
    void backward(const complexd* spec, double* phys) {
        const std::size_t n = buf_.size();
        for (std::size_t m = 0; m < n; ++m) buf_[m] = spec[m];
        run(bwd_);
        for (std::size_t m = 0; m < n; ++m) phys[m] = buf_[m].real();
    }

private:
    void run(fftw_plan p) {
        auto* b = reinterpret_cast<fftw_complex*>(buf_.data());
        fftw_execute_dft(p, b, b);
    }

    int N_;
    std::vector<complexd> buf_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

}  // namespace nse
