use clap::Parser;

fn main() {
    let cli = optomech::Cli::parse();
    std::process::exit(optomech::main_with(cli));
}
