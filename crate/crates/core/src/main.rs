fn main() {
    gptsm::cli::main()
}
