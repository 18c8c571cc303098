// Acceptance suite: one pass/fail line per criterion.
// Placeholder; criteria are implemented incrementally.

#include <iostream>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::cerr << "acceptance suite not wired yet\n";
    return 1;
}
