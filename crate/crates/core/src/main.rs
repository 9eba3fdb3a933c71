fn main() {
    std::process::exit(kernelctrl::cli::main_from_env());
}
