pub mod cb;
pub mod hydro;
pub mod magnus;
pub mod mitigate;
pub mod quench;
pub mod spd;
