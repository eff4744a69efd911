use latent_causal_cli::{dispatch, parse_args, CliError, EXIT_OK, EXIT_USAGE};

fn main() {
    let code = match parse_args(std::env::args_os()) {
        Ok(inv) => dispatch(&inv),
        Err(CliError::Display(text)) => {
            print!("{text}");
            EXIT_OK
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    };
    std::process::exit(code);
}
