//! Reference elements, quadrature, dof numbering and finite element spaces.

pub mod basis;
pub mod dofmap;
pub mod quadrature;
pub mod space;
