fn main() {
    std::process::exit(cal_core::cli::dispatch(std::env::args_os()));
}
