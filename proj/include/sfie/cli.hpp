#ifndef SFIE_CLI_HPP
#define SFIE_CLI_HPP

namespace sfie::cli {

/// Entry point for the command-line tool. Returns the process exit code:
/// 0 on success, 2 for configuration or input problems, 3 when an iteration
/// diverges, 64 for usage errors.
int run(int argc, const char* const* argv);

}  // namespace sfie::cli

#endif  // SFIE_CLI_HPP
