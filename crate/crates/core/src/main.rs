fn main() {
    std::process::exit(ema_core::cli::cli_main(std::env::args_os()));
}
