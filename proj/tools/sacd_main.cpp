#include <string>
#include <vector>

int sacd_cli_main(const std::vector<std::string>& args);

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sacd_cli_main(args);
}
