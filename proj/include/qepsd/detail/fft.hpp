#pragma once

#include <complex>
#include <cstddef>
#include <new>
#include <span>
#include <vector>

#include <fftw3.h>

namespace qepsd::detail {

/// Owning FFTW buffer pair plus forward/backward plans for one length.
/// Buffers come from fftw_malloc so plan selection does not depend on the
/// caller's allocation alignment; results are reproducible run to run.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n ? n : 1)));
        if (!buf_) throw std::bad_alloc();
        if (n_ == 0) return;
        fwd_ = fftw_plan_dft_1d(static_cast<int>(n_), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(static_cast<int>(n_), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft() {
        if (fwd_) fftw_destroy_plan(fwd_);
        if (bwd_) fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    std::size_t size() const { return n_; }

    /// x <- IDFT(H .* DFT(x)), with the 1/N normalization applied.
    void filter(std::span<std::complex<double>> x, std::span<const std::complex<double>> h) {
        if (n_ == 0) return;
        auto* b = reinterpret_cast<std::complex<double>*>(buf_);
        for (std::size_t k = 0; k < n_; ++k) b[k] = x[k];
        fftw_execute(fwd_);
        for (std::size_t k = 0; k < n_; ++k) b[k] *= h[k];
        fftw_execute(bwd_);
        const double inv = 1.0 / static_cast<double>(n_);
        for (std::size_t k = 0; k < n_; ++k) x[k] = b[k] * inv;
    }

    std::vector<std::complex<double>> forward(std::span<const std::complex<double>> x) {
        auto* b = reinterpret_cast<std::complex<double>*>(buf_);
        for (std::size_t k = 0; k < n_; ++k) b[k] = x[k];
        if (n_) fftw_execute(fwd_);
        return {b, b + n_};
    }

private:
    std::size_t n_;
    fftw_complex* buf_{nullptr};
    fftw_plan fwd_{nullptr};
    fftw_plan bwd_{nullptr};
};

}  // namespace qepsd::detail
