#include <atomic>
#include <cstdlib>
#include <string>

#include "dbnkit/error.hpp"
#include "dbnkit/kernels.hpp"

namespace dbnkit::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_for(Backend b) {
    switch (b) {
        case Backend::scalar: return &scalar_table();
        case Backend::avx2: return cpu_has_avx2() ? avx2_table() : nullptr;
        case Backend::neon: return neon_table();
    }
    return nullptr;
}

Backend detect() {
    if (const char* env = std::getenv("DBNKIT_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return Backend::scalar;
        if (want == "avx2" && table_for(Backend::avx2)) return Backend::avx2;
        if (want == "neon" && table_for(Backend::neon)) return Backend::neon;
    }
    if (table_for(Backend::avx2)) return Backend::avx2;
    if (table_for(Backend::neon)) return Backend::neon;
    return Backend::scalar;
}

struct State {
    std::atomic<const KernelTable*> table;
    std::atomic<Backend> backend;
    State() {
        const Backend b = detect();
        backend.store(b);
        table.store(table_for(b));
    }
};

State& state() {
    static State s;
    return s;
}

}  // namespace

bool backend_available(Backend b) { return table_for(b) != nullptr; }

Backend active_backend() { return state().backend.load(); }

void select_backend(Backend b) {
    const KernelTable* t = table_for(b);
    if (!t) throw InvalidInput("kernel backend '" + std::string(backend_name(b)) + "' is not available");
    state().table.store(t);
    state().backend.store(b);
}

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

const KernelTable& active() { return *state().table.load(std::memory_order_relaxed); }

}  // namespace dbnkit::kernels
