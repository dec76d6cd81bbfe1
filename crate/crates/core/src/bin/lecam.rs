fn main() {
    std::process::exit(lecam::cli::main_with_std_streams());
}
