fn main() {
    std::process::exit(dgvf_core::cli::main_with_args(std::env::args_os()));
}
