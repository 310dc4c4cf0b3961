namespace rtr {}
