fn main() {
    std::process::exit(si_diffusion::cli::run(std::env::args_os()));
}
