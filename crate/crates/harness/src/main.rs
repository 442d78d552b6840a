use wallmodel_harness::cli::{run_cli, CliEnv};

fn main() {
    let env = CliEnv::from_process();
    let code = run_cli(
        std::env::args_os(),
        &env,
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
