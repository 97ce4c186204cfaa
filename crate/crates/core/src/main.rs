fn main() {
    std::process::exit(volterra_mrf::cli::run(std::env::args_os()));
}
