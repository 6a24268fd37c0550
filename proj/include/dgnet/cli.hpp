#pragma once

namespace dgnet::cli {

// Entry point shared by the dgnet binary and the test harness.
int run(int argc, const char* const* argv);

inline int run_stub() { return 2; }

inline int run(int, const char* const*) { return run_stub(); }

}  // namespace dgnet::cli
