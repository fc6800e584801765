//! Generate both kinds of environment, store one and read it back.

use landscape_lab::environment::{gen_environment, EnvParams, EnvironmentField};

fn main() -> landscape_lab::Result<()> {
    let lattice = gen_environment(
        &EnvParams::Exponential {
            n_levels: 3,
            n_cols: 3,
            rate: 2.0,
        },
        42,
    )?;
    for k in 0..3 {
        let row: Vec<String> = (0..3)
            .map(|x| format!("{:.4}", lattice.weight(k, x)))
            .collect();
        println!("level {k}: {}", row.join(" "));
    }

    let params = EnvParams::SemiDiscrete {
        n_levels: 4,
        mesh: 0.01,
        x_min: 0.0,
        x_max: 1.0,
    };
    let semi = gen_environment(&params, 7)?;
    for k in 0..semi.n_levels() {
        println!(
            "B_{k}(0) = {:.1}, B_{k}(1) = {:+.4}",
            semi.path(k, 0),
            semi.path(k, semi.width() - 1)
        );
    }

    let dir = tempfile_dir();
    semi.save(&dir, "env")?;
    let back = EnvironmentField::load(&dir, "env")?;
    println!(
        "round trip through {}: identical = {}",
        dir.display(),
        back.path(3, 50) == semi.path(3, 50)
    );
    println!("{}", serde_json::to_string_pretty(&semi.header()).unwrap());
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("landscape-lab-env-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
