#include "cashbo/parallel.hpp"

namespace cashbo::parallel {

namespace {
int g_max_threads = 0;
}

int max_threads() { return g_max_threads; }

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

}  // namespace cashbo::parallel
