fn main() {
    std::process::exit(fedsketch::cli::main_with_args(std::env::args_os()));
}
