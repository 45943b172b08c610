#include "dtmc/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace dtmc::kernels {

#if defined(DTMC_HAVE_AVX2)
const Backend& avx2_impl();
const Backend* avx2() {
    return __builtin_cpu_supports("avx2") ? &avx2_impl() : nullptr;
}
#else
const Backend* avx2() { return nullptr; }
#endif

#if defined(DTMC_HAVE_NEON)
const Backend& neon_impl();
const Backend* neon() { return &neon_impl(); }
#else
const Backend* neon() { return nullptr; }
#endif

namespace {

const Backend& select() {
    if (const char* env = std::getenv("DTMC_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return scalar();
        if (want == "avx2") {
            if (const Backend* b = avx2()) return *b;
            throw std::runtime_error("DTMC_KERNELS=avx2 requested but AVX2 is unavailable");
        }
        if (want == "neon") {
            if (const Backend* b = neon()) return *b;
            throw std::runtime_error("DTMC_KERNELS=neon requested but NEON is unavailable");
        }
        if (!want.empty())
            throw std::runtime_error("unknown DTMC_KERNELS value: " + want);
    }
    if (const Backend* b = avx2()) return *b;
    if (const Backend* b = neon()) return *b;
    return scalar();
}

}  // namespace

const Backend& active() {
    static const Backend& backend = select();
    return backend;
}

std::vector<const Backend*> available() {
    std::vector<const Backend*> out{&scalar()};
    if (const Backend* b = avx2()) out.push_back(b);
    if (const Backend* b = neon()) out.push_back(b);
    return out;
}

}  // namespace dtmc::kernels
