use thunder_cli::{run, Connector, Env};

fn main() {
    let env = Env::from_process();
    let code = run(
        std::env::args_os(),
        &env,
        &Connector::Http,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code as i32);
}
