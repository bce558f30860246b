fn main() {
    std::process::exit(downscale_bench::cli::run_from_env());
}
