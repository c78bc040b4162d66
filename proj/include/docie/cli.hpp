#ifndef DOCIE_CLI_HPP_
#define DOCIE_CLI_HPP_

namespace docie {

// Entry point behind the `docie` binary; exposed so tests can drive the
// commands in-process. Exit codes: 0 success, 2 bad configuration or input,
// 3 training divergence, 4 checkpoint/corpus mismatch.
int cli_main(int argc, const char* const* argv);

}  // namespace docie

#endif  // DOCIE_CLI_HPP_
