fn main() {
    std::process::exit(knnrex::cli::run_command(std::env::args_os()));
}
