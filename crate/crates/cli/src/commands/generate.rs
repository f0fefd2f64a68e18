use std::fs;

use clap::Args;

use d3r_core::dataset::{generate_synthetic_category, SyntheticSpec};

use crate::error::{io_err, CliError, CliResult};
use crate::manifest;
use crate::settings::Common;

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training images per category
    #[arg(long, default_value_t = 64)]
    pub n_train: usize,
    /// Defect-free test images per category
    #[arg(long, default_value_t = 16)]
    pub n_good: usize,
    /// Defective test images per category
    #[arg(long, default_value_t = 16)]
    pub n_defect: usize,
    /// Replace existing category directories
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: &GenerateArgs, c: &Common) -> CliResult<()> {
    let out = c.out.clone().ok_or_else(|| CliError::usage("--out is required"))?;
    let categories = c.categories()?;
    for cat in &categories {
        let dir = out.join(cat);
        if dir.exists() {
            if !args.force {
                return Err(CliError::data(format!(
                    "{} already exists; pass --force to replace it",
                    dir.display()
                )));
            }
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
    }
    let mut artifacts = Vec::new();
    for cat in &categories {
        let index = generate_synthetic_category(
            &out,
            &SyntheticSpec {
                category: cat.clone(),
                seed: c.seed.unwrap_or(0),
                n_train: args.n_train,
                n_good_test: args.n_good,
                n_defect_test: args.n_defect,
                image_side: c.image_side(),
            },
        )?;
        let files = manifest::files_under(&out.join(cat))?;
        println!("{}", out.join(cat).display());
        let mut dirs: Vec<_> = files.iter().filter_map(|f| f.parent().map(|p| p.to_path_buf())).collect();
        dirs.dedup();
        for d in dirs {
            let n = files.iter().filter(|f| f.parent() == Some(d.as_path())).count();
            let rel = d.strip_prefix(&out).unwrap_or(&d);
            println!("  {}/ ({n} files)", rel.display());
        }
        println!(
            "  {} train, {} test ({} defective)",
            index.train.len(),
            index.test.len(),
            index.test.iter().filter(|s| s.is_anomalous()).count()
        );
        artifacts.extend(files);
    }
    manifest::write(&out, "generate", c, &artifacts)?;
    Ok(())
}
