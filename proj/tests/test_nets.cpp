// populated alongside its module
