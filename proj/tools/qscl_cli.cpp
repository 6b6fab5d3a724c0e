#include <iostream>

int main() {
    std::cout << "qscl_cli: work in progress\n";
    return 0;
}
