#pragma once

// Thin FFTW wrapper keyed by lattice resolution. Plans are created once under
// a mutex with FFTW_ESTIMATE (deterministic plan choice) and executed through
// the new-array interface, which is thread-safe.

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "geometry.hpp"

namespace tubewave::fft {

namespace detail {

struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    ~PlanPair() {
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

inline const PlanPair& plans_for(const std::vector<int>& resolution) {
    static std::map<std::vector<int>, std::unique_ptr<PlanPair>> cache;
    std::lock_guard lock(planner_mutex());
    auto& slot = cache[resolution];
    if (!slot) {
        std::size_t n = 1;
        for (int r : resolution) n *= static_cast<std::size_t>(r);
        std::vector<cdouble> a(n), b(n);
        auto* in = reinterpret_cast<fftw_complex*>(a.data());
        auto* out = reinterpret_cast<fftw_complex*>(b.data());
        const int rank = static_cast<int>(resolution.size());
        slot = std::make_unique<PlanPair>();
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        slot->forward = fftw_plan_dft(rank, resolution.data(), in, out, FFTW_FORWARD, flags);
        slot->backward = fftw_plan_dft(rank, resolution.data(), in, out, FFTW_BACKWARD, flags);
    }
    return *slot;
}

}  // namespace detail

/// Unnormalized forward transform: out_k = sum_x in_x e^{-i k x}.
inline void forward(const Lattice& lat, std::span<const cdouble> in, std::span<cdouble> out) {
    const auto& p = detail::plans_for(lat.resolution());
    fftw_execute_dft(p.forward, reinterpret_cast<fftw_complex*>(const_cast<cdouble*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

/// Inverse transform including the 1/n factor, so inverse(forward(x)) = x.
inline void inverse(const Lattice& lat, std::span<const cdouble> in, std::span<cdouble> out) {
    const auto& p = detail::plans_for(lat.resolution());
    fftw_execute_dft(p.backward, reinterpret_cast<fftw_complex*>(const_cast<cdouble*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
    const double scale = 1.0 / static_cast<double>(lat.size());
    for (auto& v : out) v *= scale;
}

/// Discrete Fourier coefficients c_k = (1/n) sum_x f_x e^{-i k x}.
inline std::vector<cdouble> coefficients(const Field& f) {
    std::vector<cdouble> c(f.size());
    forward(*f.lattice, f.values, c);
    const double scale = 1.0 / static_cast<double>(f.size());
    for (auto& v : c) v *= scale;
    return c;
}

}  // namespace tubewave::fft
