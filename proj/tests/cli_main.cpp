// Test runner for the command-line binary. The first positional argument is
// the path to the binary under test; everything else goes to doctest.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <string>
#include <vector>

std::string g_cli_path;

int main(int argc, char** argv) {
    std::vector<char*> args;
    args.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        if (g_cli_path.empty() && argv[i][0] != '-') {
            g_cli_path = argv[i];
            continue;
        }
        args.push_back(argv[i]);
    }
    if (g_cli_path.empty()) {
        std::fprintf(stderr, "usage: cli_tests <path-to-cli-binary> [doctest args]\n");
        return 1;
    }
    doctest::Context ctx(static_cast<int>(args.size()), args.data());
    return ctx.run();
}
