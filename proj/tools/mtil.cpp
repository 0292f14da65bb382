#include <cstdio>

int main() {
    std::puts("mtil: subcommands not wired yet");
    return 1;
}
