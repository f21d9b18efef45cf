#include <iostream>

int main() {
    std::cout << "netresil 0.1.0\n";
    return 0;
}
