fn main() {
    psk_cli::run();
}
