//! Command-line front end for `swarm-core`: reads JSON system specs and
//! writes JSON reports, trajectory CSV and SVG phase plots.

pub mod report;
pub mod run;
pub mod spec;
