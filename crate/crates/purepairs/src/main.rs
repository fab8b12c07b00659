fn main() {
    eprintln!("CLI not wired up yet");
    std::process::exit(2);
}
