fn main() {
    std::process::exit(ips_lab::cli_io::main());
}
