int main() { return 1; }  // placeholder, filled in after unit tests pass
