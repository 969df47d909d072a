fn main() {
    eprintln!("acceptance suite not wired up yet");
    std::process::exit(1);
}
