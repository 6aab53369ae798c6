//! Tour of the request language: scripts, the canonical pretty form,
//! compilation against the block registry, and positioned diagnostics.

use datafabric::lang::{compile_program, parse_program, LangError};
use datafabric::{Compiler, Registry};

fn diagnose(script: &str) -> LangError {
    let mut compiler = Compiler::new(Registry::standard());
    compile_program(script, &mut compiler).expect_err("script is broken on purpose")
}

fn main() {
    let script = r#"
# weather probes, two per line styles welcome
MATCH ANY(temp, pressure)
  WHERE value >= 20.5 AND city != "Pune"
  APPLY avg(value);
MATCH ALL(sensor, temp) APPLY search;
"#;

    let asts = parse_program(script).expect("script parses");
    let mut compiler = Compiler::new(Registry::standard());
    for ast in &asts {
        let request = compiler.compile(ast).expect("script compiles");
        println!("{}", ast.pretty());
        println!(
            "    -> id {}, mode {}, keywords {:?}, op {} with {} arg(s), {} bytes on the wire",
            request.request_id,
            request.mode,
            request.keywords,
            request.op,
            request.args.len(),
            request.body_size(),
        );
    }

    println!("\nbroken scripts and their diagnostics (line:col):");
    for broken in [
        "MATCH SOME(temp) APPLY count;",
        "MATCH ANY() APPLY count;",
        "MATCH ANY(temp) WHERE value > APPLY count;",
        "MATCH ANY(temp) WHERE city < \"Oslo\" APPLY count;",
        "MATCH ANY(temp) APPLY frobnicate;",
        "MATCH ANY(temp) APPLY sum;",
        "MATCH ANY(temp) APPLY count",
    ] {
        println!("    {broken}");
        println!("        {}", diagnose(broken));
    }
}
