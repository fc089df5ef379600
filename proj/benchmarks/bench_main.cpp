#include <benchmark/benchmark.h>

// libbenchmark_main.a from the distro ships LTO bytecode tied to one gcc point release.
BENCHMARK_MAIN();
